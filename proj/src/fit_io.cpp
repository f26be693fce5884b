/*
 * Copyright 2026 The facenorm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "facenorm/error.hpp"
#include "facenorm/fitting.hpp"

#include <json.hpp>

namespace facenorm {

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

std::string fit_result_to_json(const FitResult& result)
{
    nlohmann::ordered_json j;
    const auto& c = result.coefficients;
    j["alpha"] = to_vector(c.alpha);
    j["beta"] = to_vector(c.beta);
    j["delta"] = to_vector(c.delta);
    j["rotation"] = to_vector(c.rotation);
    j["translation"] = to_vector(c.translation);
    j["gamma"] = to_vector(result.lighting.gamma);
    j["converged"] = result.converged;
    auto trace = nlohmann::ordered_json::array();
    for (const auto& rec : result.trace) {
        nlohmann::ordered_json r;
        r["iter"] = rec.iter;
        r["total"] = rec.total;
        for (const auto& [name, value] : rec.terms) {
            r[name] = value;
        }
        trace.push_back(std::move(r));
    }
    j["trace"] = std::move(trace);
    return j.dump();
}

FitResult fit_result_from_json(const std::string& text)
{
    FitResult result;
    try {
        const auto j = nlohmann::json::parse(text);
        auto& c = result.coefficients;
        c.alpha = from_vector(j.at("alpha").get<std::vector<double>>());
        c.beta = from_vector(j.at("beta").get<std::vector<double>>());
        c.delta = from_vector(j.at("delta").get<std::vector<double>>());
        const auto rot = j.at("rotation").get<std::vector<double>>();
        const auto tr = j.at("translation").get<std::vector<double>>();
        const auto gamma = j.at("gamma").get<std::vector<double>>();
        if (rot.size() != 3 || tr.size() != 3 || gamma.size() != 27) {
            throw DataError("fit result has malformed rotation, translation or gamma");
        }
        c.rotation = Eigen::Vector3d(rot[0], rot[1], rot[2]);
        c.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
        result.lighting.gamma = Eigen::Map<const Eigen::Matrix<double, 27, 1>>(gamma.data());
        result.converged = j.value("converged", false);
        if (j.contains("trace")) {
            for (const auto& r : j.at("trace")) {
                LossRecord rec;
                for (const auto& [key, value] : r.items()) {
                    if (key == "iter") {
                        rec.iter = value.get<int>();
                    } else if (key == "total") {
                        rec.total = value.get<double>();
                    } else {
                        rec.terms[key] = value.get<double>();
                    }
                }
                result.trace.push_back(std::move(rec));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid fit result JSON: ") + e.what());
    }
    return result;
}

} // namespace facenorm
