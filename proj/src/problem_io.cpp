#include "pbr/problem_io.h"

#include "pbr/errors.h"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace pbr {

using nlohmann::json;

namespace {

json cap_value(double u) { return std::isfinite(u) ? json(u) : json(nullptr); }

double read_cap(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::numeric_limits<double>::infinity();
    }
    return j.at(key).get<double>();
}

}  // namespace

std::string dump_problem(const ProblemInstance& problem) {
    json j;
    json rows = json::array();
    for (Eigen::Index r = 0; r < problem.returns.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < problem.returns.cols(); ++c) {
            row.push_back(problem.returns(r, c));
        }
        rows.push_back(std::move(row));
    }
    j["returns"] = std::move(rows);
    j["beta"] = problem.beta;
    if (problem.R) j["R"] = *problem.R;
    if (problem.caps) j["caps"] = {{"u1", cap_value(problem.caps->u1)}, {"u2", cap_value(problem.caps->u2)}};
    return j.dump(2);
}

ProblemInstance load_problem(const std::string& json_text) {
    ProblemInstance out;
    try {
        const json j = json::parse(json_text);
        const auto& rows = j.at("returns");
        if (!rows.is_array() || rows.empty()) {
            throw InputError("load_problem: 'returns' must be a non-empty array of rows");
        }
        const auto p = static_cast<Eigen::Index>(rows.size());
        const auto n = static_cast<Eigen::Index>(rows.at(0).size());
        out.returns.resize(p, n);
        for (Eigen::Index r = 0; r < p; ++r) {
            const auto& row = rows.at(static_cast<std::size_t>(r));
            if (static_cast<Eigen::Index>(row.size()) != n) {
                throw InputError("load_problem: ragged 'returns' rows");
            }
            for (Eigen::Index c = 0; c < n; ++c) {
                out.returns(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
            }
        }
        out.beta = j.at("beta").get<double>();
        if (j.contains("R") && !j.at("R").is_null()) out.R = j.at("R").get<double>();
        if (j.contains("caps") && !j.at("caps").is_null()) {
            out.caps = Caps{read_cap(j.at("caps"), "u1"), read_cap(j.at("caps"), "u2")};
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("load_problem: ") + e.what());
    }
    return out;
}

void save_problem(const std::string& path, const ProblemInstance& problem) {
    std::ofstream os(path);
    if (!os) {
        throw InputError("save_problem: cannot open " + path);
    }
    os << dump_problem(problem) << '\n';
}

ProblemInstance read_problem(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw InputError("read_problem: cannot open " + path);
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return load_problem(ss.str());
}

}  // namespace pbr
