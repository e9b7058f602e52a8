#include "pbr/config.h"

#include "pbr/errors.h"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pbr {

using nlohmann::json;

namespace {

VectorXd to_vector(const json& j, const char* key) {
    if (!j.is_array()) {
        throw InputError(std::string("config: '") + key + "' must be an array");
    }
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

MatrixXd to_matrix(const json& j, const char* key) {
    if (!j.is_array() || j.empty()) {
        throw InputError(std::string("config: '") + key + "' must be a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw InputError(std::string("config: ragged rows in '") + key + "'");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

json vector_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json matrix_json(const MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
    return a;
}

PenaltySpec parse_penalty(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    auto num = [&](const char* key, double def) {
        if (!j.contains(key) || j.at(key).is_null()) return def;
        return j.at(key).get<double>();
    };
    if (type == "caps") {
        return Caps{num("u1", std::numeric_limits<double>::infinity()), num("u2", std::numeric_limits<double>::infinity())};
    }
    if (type == "ratios") {
        return Ratios{num("r1", 1.0), num("r2", 1.0)};
    }
    if (type == "dualized") {
        return Dualized{num("lambda0", 0.0), num("lambda1", 0.0), num("lambda2", 0.0)};
    }
    throw InputError("config: unknown penalty type '" + type + "'");
}

json penalty_json(const PenaltySpec& p) {
    auto cap = [](double u) { return std::isfinite(u) ? json(u) : json(nullptr); };
    if (const auto* c = std::get_if<Caps>(&p)) return {{"type", "caps"}, {"u1", cap(c->u1)}, {"u2", cap(c->u2)}};
    if (const auto* r = std::get_if<Ratios>(&p)) return {{"type", "ratios"}, {"r1", r->r1}, {"r2", r->r2}};
    const auto& d = std::get<Dualized>(p);
    return {{"type", "dualized"}, {"lambda0", d.lambda0}, {"lambda1", d.lambda1}, {"lambda2", d.lambda2}};
}

MarketModel parse_model(const json& j, bool& synthetic) {
    const std::string type = j.at("type").get<std::string>();
    VectorXd mu;
    MatrixXd sigma;
    synthetic = !j.contains("mu");
    if (synthetic) {
        const auto p = static_cast<Eigen::Index>(j.value("assets", 10));
        if (p < 1 || p > 10) {
            throw InputError("config: 'assets' must lie in 1..10 for the synthetic parameters");
        }
        mu = synthetic_mu().head(p);
        sigma = synthetic_sigma().topLeftCorner(p, p);
    } else {
        mu = to_vector(j.at("mu"), "mu");
        sigma = to_matrix(j.at("sigma"), "sigma");
    }
    if (type == "gaussian") {
        return GaussianModel{mu, sigma};
    }
    if (type == "elliptical") {
        EllipticalModel m{mu, sigma, GammaMixing{}};
        if (j.contains("mixing")) {
            const auto& mj = j.at("mixing");
            const std::string mt = mj.at("type").get<std::string>();
            if (mt == "gamma") {
                m.mixing = GammaMixing{mj.value("shape", 3.0), mj.value("scale", 0.5)};
            } else if (mt == "point_mass") {
                m.mixing = PointMassMixing{mj.value("value", 1.0)};
            } else {
                throw InputError("config: unknown mixing type '" + mt + "'");
            }
        }
        return m;
    }
    if (type == "jump_mixture") {
        JumpMixtureModel m;
        m.mu = mu;
        m.sigma = sigma;
        m.q_jump = j.value("q_jump", 0.05);
        m.lambda_exp = j.value("lambda_exp", 1.0);
        m.f = j.contains("f") ? to_vector(j.at("f"), "f") : default_jump_offset(mu, sigma);
        return m;
    }
    throw InputError("config: unknown model type '" + type + "'");
}

json model_json(const MarketModel& model) {
    json j;
    j["type"] = model_tag(model);
    j["mu"] = vector_json(model_mu(model));
    j["sigma"] = matrix_json(model_sigma(model));
    if (const auto* e = std::get_if<EllipticalModel>(&model)) {
        if (const auto* g = std::get_if<GammaMixing>(&e->mixing)) {
            j["mixing"] = {{"type", "gamma"}, {"shape", g->shape}, {"scale", g->scale}};
        } else {
            j["mixing"] = {{"type", "point_mass"}, {"value", std::get<PointMassMixing>(e->mixing).value}};
        }
    }
    if (const auto* m = std::get_if<JumpMixtureModel>(&model)) {
        j["q_jump"] = m->q_jump;
        j["lambda_exp"] = m->lambda_exp;
        j["f"] = vector_json(m->f);
    }
    return j;
}

}  // namespace

std::string method_label(const MethodSpec& m) {
    if (!m.label.empty()) return m.label;
    switch (m.kind) {
        case MethodKind::Emp:
            return "emp";
        case MethodKind::Markowitz:
            return "markowitz";
        case MethodKind::Dualized:
            return "dualized";
        case MethodKind::Pen:
            break;
    }
    std::ostringstream os;
    if (const auto* r = std::get_if<Ratios>(&m.penalty)) {
        os << "pen(r1=" << r->r1 << ";r2=" << r->r2 << ")";
    } else if (const auto* c = std::get_if<Caps>(&m.penalty)) {
        os << "pen(u1=" << c->u1 << ";u2=" << c->u2 << ")";
    } else {
        os << "pen";
    }
    return os.str();
}

ExperimentConfig parse_config(const std::string& json_text) {
    ExperimentConfig c;
    try {
        const json j = json::parse(json_text);
        c.model = parse_model(j.at("model"), c.synthetic_parameters);
        c.beta = j.value("beta", 0.95);
        c.n = static_cast<Eigen::Index>(j.value("n", 250));
        c.trials = j.value("trials", 100);
        if (j.contains("r_grid") && !j.at("r_grid").is_null()) {
            c.r_grid = j.at("r_grid").get<std::vector<double>>();
        }
        if (j.contains("lambda0_grid")) {
            c.lambda0_grid = j.at("lambda0_grid").get<std::vector<double>>();
        }
        for (const auto& mj : j.at("methods")) {
            MethodSpec m;
            const std::string type = mj.at("type").get<std::string>();
            if (type == "emp") {
                m.kind = MethodKind::Emp;
            } else if (type == "markowitz") {
                m.kind = MethodKind::Markowitz;
            } else if (type == "pen") {
                m.kind = MethodKind::Pen;
                m.penalty = parse_penalty(mj.at("penalty"));
                if (std::holds_alternative<Dualized>(m.penalty)) {
                    throw InputError("config: 'pen' methods take caps or ratios; use type 'dualized' for weights");
                }
            } else if (type == "dualized") {
                m.kind = MethodKind::Dualized;
                m.penalty = mj.contains("penalty") ? parse_penalty(mj.at("penalty")) : PenaltySpec(Dualized{});
                if (!std::holds_alternative<Dualized>(m.penalty)) {
                    throw InputError("config: 'dualized' methods take a dualized penalty");
                }
            } else {
                throw InputError("config: unknown method type '" + type + "'");
            }
            m.label = mj.value("label", std::string());
            c.methods.push_back(std::move(m));
        }
        c.master_seed = j.value("master_seed", std::uint64_t{1});
        c.output_dir = j.value("output_dir", std::string("out"));
        c.threads = j.value("threads", 1);
        if (j.contains("theory")) {
            const auto& t = j.at("theory");
            if (t.contains("n_grid")) c.theory.n_grid = t.at("n_grid").get<std::vector<Eigen::Index>>();
            c.theory.lambda0 = t.value("lambda0", c.theory.lambda0);
            c.theory.lambda1 = t.value("lambda1", c.theory.lambda1);
            if (t.contains("lambda1_grid")) c.theory.lambda1_grid = t.at("lambda1_grid").get<std::vector<double>>();
            if (t.contains("lambda0_grid")) c.theory.lambda0_grid = t.at("lambda0_grid").get<std::vector<double>>();
        }
        if (j.contains("cv")) {
            const auto& cv = j.at("cv");
            if (cv.contains("R")) {
                c.cv.R = cv.at("R").get<double>();
                c.cv.has_R = true;
            }
            c.cv.folds = cv.value("folds", 5);
            if (cv.contains("grid")) {
                c.cv.grid.clear();
                for (const auto& g : cv.at("grid")) {
                    c.cv.grid.push_back(Ratios{g.at(0).get<double>(), g.at(1).get<double>()});
                }
            }
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    validate(c.model);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw InputError("load_config: cannot open " + path);
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void validate(const ExperimentConfig& config) {
    if (config.trials < 1) throw InputError("config: trials must be at least 1");
    if (config.methods.empty()) throw InputError("config: methods must be non-empty");
    if (config.n < 2) throw InputError("config: n must be at least 2");
    if (!(config.beta >= 0.5 && config.beta < 1.0)) throw InputError("config: beta must lie in [0.5, 1)");
    if (config.threads < 1) throw InputError("config: threads must be at least 1");
    for (const auto& m : config.methods) {
        if (m.kind == MethodKind::Dualized && config.lambda0_grid.empty()) {
            throw InputError("config: dualized methods need a non-empty lambda0_grid");
        }
    }
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["model"] = model_json(c.model);
    j["beta"] = c.beta;
    j["n"] = c.n;
    j["trials"] = c.trials;
    j["r_grid"] = c.r_grid;
    j["lambda0_grid"] = c.lambda0_grid;
    json methods = json::array();
    for (const auto& m : c.methods) {
        json mj;
        switch (m.kind) {
            case MethodKind::Emp:
                mj["type"] = "emp";
                break;
            case MethodKind::Markowitz:
                mj["type"] = "markowitz";
                break;
            case MethodKind::Pen:
                mj["type"] = "pen";
                mj["penalty"] = penalty_json(m.penalty);
                break;
            case MethodKind::Dualized:
                mj["type"] = "dualized";
                mj["penalty"] = penalty_json(m.penalty);
                break;
        }
        mj["label"] = method_label(m);
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    j["master_seed"] = c.master_seed;
    j["output_dir"] = c.output_dir;
    j["threads"] = c.threads;
    j["theory"] = {{"n_grid", c.theory.n_grid},
                   {"lambda0", c.theory.lambda0},
                   {"lambda1", c.theory.lambda1},
                   {"lambda1_grid", c.theory.lambda1_grid},
                   {"lambda0_grid", c.theory.lambda0_grid}};
    json grid = json::array();
    for (const auto& r : c.cv.grid) grid.push_back({r.r1, r.r2});
    j["cv"] = {{"folds", c.cv.folds}, {"grid", std::move(grid)}};
    if (c.cv.has_R) j["cv"]["R"] = c.cv.R;
    return j.dump(2);
}

}  // namespace pbr
