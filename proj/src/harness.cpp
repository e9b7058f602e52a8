#include "pbr/harness.h"

#include "pbr/asymptotics.h"
#include "pbr/errors.h"

#include <boost/version.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace pbr {

using nlohmann::json;

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
    return splitmix64(splitmix64(master_seed) ^ (trial + 1));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool usable(SolveStatus s) { return s == SolveStatus::Optimal || s == SolveStatus::FallbackOptimal; }

// Runs body(t) for t in [0, count) on up to `threads` workers.
template <class F>
void parallel_for(int count, int threads, F body) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int t = 0; t < count; ++t) body(t);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int k = 0; k < workers; ++k) {
        pool.emplace_back([&] {
            for (int t = next++; t < count; t = next++) {
                try {
                    body(t);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// Snaps w onto w'1 = 1 before population evaluation.
VectorXd budget_projected(const VectorXd& w) {
    return w.array() + (1.0 - w.sum()) / static_cast<double>(w.size());
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double quantile_linear(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// Quotes a CSV field that contains a separator or a quote.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

struct TrialOutput {
    std::vector<TrialRecord> records;
};

TrialOutput run_trial(const ExperimentConfig& c, const PopulationEvaluator& eval, const std::vector<double>& r_grid,
                      int t) {
    TrialOutput out;
    const ReturnsSample s = sample(c.model, c.n, trial_seed(c.master_seed, static_cast<std::uint64_t>(t)));

    auto record = [&](const std::string& label, double target, const PortfolioSolution& sol) {
        TrialRecord r;
        r.trial = t;
        r.method = label;
        r.R = target;
        r.status = sol.status;
        if (usable(sol.status)) {
            const PopulationPoint pp = eval.evaluate(budget_projected(sol.w));
            r.realized_ret = pp.ret;
            r.realized_cvar = pp.cvar;
        } else {
            r.realized_ret = kNaN;
            r.realized_cvar = kNaN;
        }
        out.records.push_back(std::move(r));
    };
    auto guarded = [&](auto&& solve) {
        try {
            return solve();
        } catch (const InfeasibleError& e) {
            PortfolioSolution f;
            f.status = SolveStatus::Infeasible;
            f.message = e.what();
            return f;
        } catch (const std::exception& e) {
            PortfolioSolution f;
            f.status = SolveStatus::NumericFailure;
            f.message = e.what();
            return f;
        }
    };

    std::map<std::size_t, PortfolioSolution> emp_cache;
    auto emp_at = [&](std::size_t i) -> const PortfolioSolution& {
        auto it = emp_cache.find(i);
        if (it == emp_cache.end()) {
            it = emp_cache.emplace(i, guarded([&] { return solve_cvar_emp(s, c.beta, r_grid[i]); })).first;
        }
        return it->second;
    };

    for (const auto& m : c.methods) {
        const std::string label = method_label(m);
        if (m.kind == MethodKind::Dualized) {
            const auto& d = std::get<Dualized>(m.penalty);
            for (double l0 : c.lambda0_grid) {
                record(label, l0, guarded([&] {
                           return solve_cvar_dualized(s, c.beta, Dualized{l0, d.lambda1, d.lambda2});
                       }));
            }
            continue;
        }
        for (std::size_t i = 0; i < r_grid.size(); ++i) {
            const double R = r_grid[i];
            switch (m.kind) {
                case MethodKind::Emp:
                    record(label, R, emp_at(i));
                    break;
                case MethodKind::Markowitz:
                    record(label, R, guarded([&] {
                               PortfolioSolution sol;
                               sol.w = solve_markowitz(s.mean(), s.covariance(), R);
                               sol.status = SolveStatus::Optimal;
                               return sol;
                           }));
                    break;
                case MethodKind::Pen:
                    record(label, R, guarded([&] {
                               Caps caps;
                               if (const auto* r = std::get_if<Ratios>(&m.penalty)) {
                                   const PortfolioSolution& emp = emp_at(i);
                                   if (!usable(emp.status)) {
                                       PortfolioSolution f;
                                       f.status = emp.status;
                                       f.message = "unpenalized solve failed: " + emp.message;
                                       return f;
                                   }
                                   caps = resolve_caps(s, c.beta, emp, *r);
                               } else {
                                   caps = std::get<Caps>(m.penalty);
                               }
                               return solve_cvar_pen(s, c.beta, R, caps);
                           }));
                    break;
                case MethodKind::Dualized:
                    break;
            }
        }
    }
    return out;
}

std::vector<std::string> labels_of(const ExperimentConfig& c) {
    std::vector<std::string> out;
    for (const auto& m : c.methods) out.push_back(method_label(m));
    return out;
}

}  // namespace

std::vector<double> default_r_grid(const MarketModel& model) {
    const VectorXd mean = model_expected_return(model);
    const VectorXd wmv = min_variance_portfolio(model_sigma(model));
    const double lo = wmv.dot(mean);
    double hi = quantile_linear(std::vector<double>(mean.data(), mean.data() + mean.size()), 0.9);
    if (!(hi > lo)) {
        hi = mean.maxCoeff();
    }
    if (!(hi > lo)) {
        throw InputError("default_r_grid: asset means do not exceed the minimum-variance mean");
    }
    std::vector<double> grid(15);
    for (int i = 0; i < 15; ++i) {
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / 14.0;
    }
    return grid;
}

FrontierSummary summarize(const std::vector<TrialRecord>& trials, const std::vector<std::string>& methods,
                          const std::vector<double>& targets) {
    FrontierSummary out;
    for (const auto& m : methods) {
        for (double R : targets) {
            std::vector<double> rets, cvars;
            SummaryRow row;
            row.method = m;
            row.R = R;
            int total = 0;
            for (const auto& t : trials) {
                if (t.method != m || t.R != R) continue;
                ++total;
                if (usable(t.status)) {
                    rets.push_back(t.realized_ret);
                    cvars.push_back(t.realized_cvar);
                } else if (t.status == SolveStatus::Infeasible) {
                    ++row.infeasible;
                } else {
                    ++row.numeric_failures;
                }
            }
            if (total == 0) continue;
            row.trial_count = static_cast<int>(rets.size());
            if (!rets.empty()) {
                double sr = 0.0, sc = 0.0;
                for (std::size_t i = 0; i < rets.size(); ++i) {
                    sr += rets[i];
                    sc += cvars[i];
                }
                row.mean_ret = sr / static_cast<double>(rets.size());
                row.mean_cvar = sc / static_cast<double>(cvars.size());
                row.std_ret = sample_std(rets, row.mean_ret);
                row.std_cvar = sample_std(cvars, row.mean_cvar);
            } else {
                row.mean_ret = row.mean_cvar = row.std_ret = row.std_cvar = kNaN;
            }
            row.valid = 2 * (row.infeasible + row.numeric_failures) <= total;
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    ExperimentResult result;
    bool needs_r = false;
    for (const auto& m : config.methods) needs_r = needs_r || m.kind != MethodKind::Dualized;
    if (needs_r) {
        result.r_grid = config.r_grid.empty() ? default_r_grid(config.model) : config.r_grid;
    }
    const PopulationEvaluator eval(config.model, config.beta);

    std::vector<TrialOutput> outputs(static_cast<std::size_t>(config.trials));
    parallel_for(config.trials, config.threads,
                 [&](int t) { outputs[static_cast<std::size_t>(t)] = run_trial(config, eval, result.r_grid, t); });
    for (auto& o : outputs) {
        for (auto& r : o.records) result.trials.push_back(std::move(r));
    }

    const auto labels = labels_of(config);
    std::vector<double> targets = result.r_grid;
    targets.insert(targets.end(), config.lambda0_grid.begin(), config.lambda0_grid.end());
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    FrontierSummary summary = summarize(result.trials, labels, targets);

    // Population columns.
    std::map<double, PopulationPoint> frontier;
    if (needs_r) {
        try {
            const auto pts = population_frontier(config.model, config.beta, result.r_grid);
            for (const auto& pt : pts) frontier[pt.R] = eval.evaluate(budget_projected(pt.w0));
        } catch (const std::exception&) {
            for (double R : result.r_grid) {
                try {
                    const auto pts = population_frontier(config.model, config.beta, {R});
                    frontier[R] = eval.evaluate(budget_projected(pts.front().w0));
                } catch (const std::exception&) {
                    frontier[R] = PopulationPoint{kNaN, kNaN, kNaN};
                }
            }
        }
    }
    for (auto& row : summary.rows) {
        const MethodSpec* spec = nullptr;
        for (const auto& m : config.methods) {
            if (method_label(m) == row.method) spec = &m;
        }
        if (spec && spec->kind == MethodKind::Dualized) {
            row.population_ret = row.population_cvar = kNaN;
            if (std::holds_alternative<GaussianModel>(config.model)) {
                try {
                    const auto& d = std::get<Dualized>(spec->penalty);
                    const ThetaZero th = population_dualized_solution(model_mu(config.model), model_sigma(config.model),
                                                                      config.beta, row.R, d.lambda1);
                    const PopulationPoint pp = eval.evaluate(budget_projected(th.w));
                    row.population_ret = pp.ret;
                    row.population_cvar = pp.cvar;
                } catch (const std::exception&) {
                }
            }
        } else {
            const auto it = frontier.find(row.R);
            row.population_ret = it != frontier.end() ? it->second.ret : kNaN;
            row.population_cvar = it != frontier.end() ? it->second.cvar : kNaN;
        }
    }
    result.summary = std::move(summary);
    return result;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);

    {
        std::ofstream os(dir / "trials.csv");
        os << "trial,method,R,realized_ret,realized_cvar,status\n";
        for (const auto& t : result.trials) {
            os << t.trial << ',' << csv_field(t.method) << ',' << fmt(t.R) << ',' << fmt(t.realized_ret) << ','
               << fmt(t.realized_cvar) << ',' << to_string(t.status) << '\n';
        }
    }
    {
        std::ofstream os(dir / "summary.csv");
        os << "method,R,mean_ret,std_ret,half_std_ret,mean_cvar,std_cvar,half_std_cvar,population_ret,population_cvar,"
              "trial_count,infeasible,numeric_failures,valid\n";
        for (const auto& r : result.summary.rows) {
            os << csv_field(r.method) << ',' << fmt(r.R) << ',' << fmt(r.mean_ret) << ',' << fmt(r.std_ret) << ','
               << fmt(0.5 * r.std_ret) << ',' << fmt(r.mean_cvar) << ',' << fmt(r.std_cvar) << ','
               << fmt(0.5 * r.std_cvar) << ',' << fmt(r.population_ret) << ',' << fmt(r.population_cvar) << ','
               << r.trial_count << ',' << r.infeasible << ',' << r.numeric_failures << ',' << (r.valid ? 1 : 0)
               << '\n';
        }
    }
    {
        std::vector<TheoryRow> rows;
        if (std::holds_alternative<GaussianModel>(config.model) && model_dimension(config.model) >= 2) {
            const VectorXd& mu = model_mu(config.model);
            const MatrixXd& sigma = model_sigma(config.model);
            for (const auto& m : config.methods) {
                if (m.kind != MethodKind::Dualized) continue;
                const double l1 = std::get<Dualized>(m.penalty).lambda1;
                for (double l0 : config.lambda0_grid) {
                    try {
                        const ThetaZero th = population_dualized_solution(mu, sigma, config.beta, l0, l1);
                        const AsymptoticCov cov = l1 > 0.0 ? matrix_a1_b1(mu, sigma, config.beta, l0, l1, th)
                                                           : matrix_a0_b0(mu, sigma, config.beta, l0, th);
                        const FrontierStd fs = frontier_std(cov, mu, sigma, gaussian_g_constant(config.beta),
                                                            static_cast<double>(config.n));
                        rows.push_back({static_cast<double>(config.n), l0, l1, fs.std_mean, fs.std_cvar});
                    } catch (const std::exception&) {
                        rows.push_back({static_cast<double>(config.n), l0, l1, kNaN, kNaN});
                    }
                }
            }
        }
        std::ofstream os(dir / "theory.csv");
        write_theory_csv(os, rows);
    }
    {
        json meta;
        meta["config"] = json::parse(config_to_json(config));
        meta["master_seed"] = config.master_seed;
        meta["trial_seed_rule"] = "splitmix64(splitmix64(master_seed) ^ (trial + 1))";
        json seeds = json::array();
        for (int t = 0; t < config.trials; ++t) seeds.push_back(trial_seed(config.master_seed, static_cast<std::uint64_t>(t)));
        meta["trial_seeds"] = std::move(seeds);
        meta["r_grid"] = result.r_grid;
        meta["versions"] = {{"pbr-cvar", "0.1.0"},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"boost", BOOST_LIB_VERSION}};
        json failures = json::object();
        for (const auto& r : result.summary.rows) {
            auto& f = failures[r.method];
            if (f.is_null()) f = {{"infeasible", 0}, {"numeric_failure", 0}, {"invalid_cells", 0}};
            f["infeasible"] = f["infeasible"].get<int>() + r.infeasible;
            f["numeric_failure"] = f["numeric_failure"].get<int>() + r.numeric_failures;
            f["invalid_cells"] = f["invalid_cells"].get<int>() + (r.valid ? 0 : 1);
        }
        meta["failures"] = std::move(failures);
        if (config.synthetic_parameters) {
            meta["parameters_note"] =
                "model parameters are the built-in synthetic daily stand-ins (p <= 10, means 0.02%-0.12%, "
                "volatilities 1%-2.5%, constant correlation 0.4), not calibrated market data";
        }
        std::ofstream os(dir / "meta.json");
        os << std::setprecision(17) << meta.dump(2) << '\n';
    }
    {
        json spec;
        spec["source"] = "summary.csv";
        spec["figures"] = json::array(
            {{{"kind", "frontier"},
              {"x", "mean_cvar"},
              {"y", "mean_ret"},
              {"x_error", "half_std_cvar"},
              {"y_error", "half_std_ret"},
              {"group_by", "method"},
              {"reference", {{"x", "population_cvar"}, {"y", "population_ret"}}},
              {"error_bar_convention", "plus/minus one half standard deviation"}}});
        std::ofstream os(dir / "plot_spec.json");
        os << spec.dump(2) << '\n';
    }
}

std::vector<TheorySimRow> theory_vs_sim(const ExperimentConfig& config, double lambda0, double lambda1) {
    const auto* g = std::get_if<GaussianModel>(&config.model);
    if (!g) {
        throw InputError("theory_vs_sim: the asymptotic formulas need a Gaussian model");
    }
    if (config.trials < 2) {
        throw InputError("theory_vs_sim: need at least two trials");
    }
    const PopulationEvaluator eval(config.model, config.beta);
    const ThetaZero th = population_dualized_solution(g->mu, g->sigma, config.beta, lambda0, lambda1);
    const AsymptoticCov cov = lambda1 > 0.0 ? matrix_a1_b1(g->mu, g->sigma, config.beta, lambda0, lambda1, th)
                                            : matrix_a0_b0(g->mu, g->sigma, config.beta, lambda0, th);
    const double G = gaussian_g_constant(config.beta);

    std::vector<TheorySimRow> rows;
    for (Eigen::Index n : config.theory.n_grid) {
        std::vector<double> rets(static_cast<std::size_t>(config.trials), kNaN);
        std::vector<double> cvars(rets.size(), kNaN);
        const std::uint64_t base = splitmix64(config.master_seed ^ static_cast<std::uint64_t>(n));
        parallel_for(config.trials, config.threads, [&](int t) {
            const ReturnsSample s = sample(config.model, n, trial_seed(base, static_cast<std::uint64_t>(t)));
            const PortfolioSolution sol = solve_cvar_dualized(s, config.beta, Dualized{lambda0, lambda1, 0.0});
            if (usable(sol.status)) {
                const PopulationPoint pp = eval.evaluate(budget_projected(sol.w));
                rets[static_cast<std::size_t>(t)] = pp.ret;
                cvars[static_cast<std::size_t>(t)] = pp.cvar;
            }
        });
        std::vector<double> r, c;
        for (std::size_t i = 0; i < rets.size(); ++i) {
            if (std::isfinite(rets[i])) {
                r.push_back(rets[i]);
                c.push_back(cvars[i]);
            }
        }
        TheorySimRow row;
        row.n = n;
        row.trial_count = static_cast<int>(r.size());
        double mr = 0.0, mc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            mr += r[i];
            mc += c[i];
        }
        mr /= std::max<double>(1.0, static_cast<double>(r.size()));
        mc /= std::max<double>(1.0, static_cast<double>(c.size()));
        row.sim_std_mean = sample_std(r, mr);
        row.sim_std_cvar = sample_std(c, mc);
        const FrontierStd fs = frontier_std(cov, g->mu, g->sigma, G, static_cast<double>(n));
        row.theory_std_mean = fs.std_mean;
        row.theory_std_cvar = fs.std_cvar;
        rows.push_back(row);
    }
    return rows;
}

CvResult select_penalty_ratios(const ReturnsSample& sample, double beta, double R, const std::vector<Ratios>& grid,
                               int folds) {
    const Eigen::Index n = sample.observations();
    if (folds < 2 || grid.empty() || n / folds < 2) {
        throw InputError("select_penalty_ratios: need folds >= 2, a non-empty grid and at least two observations per fold");
    }
    const MatrixXd& X = sample.data();
    std::vector<double> total(grid.size(), 0.0);
    std::vector<bool> feasible(grid.size(), true);

    for (int f = 0; f < folds; ++f) {
        const Eigen::Index lo = n * f / folds;
        const Eigen::Index hi = n * (f + 1) / folds;
        MatrixXd train(X.rows(), n - (hi - lo));
        train << X.leftCols(lo), X.rightCols(n - hi);
        const MatrixXd test = X.middleCols(lo, hi - lo);
        const ReturnsSample tr(train);
        PortfolioSolution emp;
        try {
            emp = solve_cvar_emp(tr, beta, R);
        } catch (const std::exception&) {
            emp.status = SolveStatus::NumericFailure;
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (!feasible[g]) continue;
            if (!usable(emp.status)) {
                feasible[g] = false;
                continue;
            }
            try {
                const Caps caps = resolve_caps(tr, beta, emp, grid[g]);
                const PortfolioSolution pen = solve_cvar_pen(tr, beta, R, caps);
                if (!usable(pen.status)) {
                    feasible[g] = false;
                    continue;
                }
                const VectorXd losses = -(test.transpose() * pen.w);
                total[g] += ru_cvar(losses, beta).value;
            } catch (const std::exception&) {
                feasible[g] = false;
            }
        }
    }

    CvResult out;
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double score = feasible[g] ? total[g] / folds : kNaN;
        out.scores.push_back({grid[g], score, feasible[g]});
        if (!feasible[g]) continue;
        if (!best) {
            best = g;
            continue;
        }
        const double bs = out.scores[*best].score;
        const auto& a = grid[g];
        const auto& b = grid[*best];
        const bool larger = (a.r1 + a.r2 > b.r1 + b.r2) || (a.r1 + a.r2 == b.r1 + b.r2 && a.r1 > b.r1);
        if (score < bs || (score == bs && larger)) {
            best = g;
        }
    }
    if (!best) {
        throw SelectionError("select_penalty_ratios: every grid point is infeasible on some fold");
    }
    out.selected = grid[*best];
    return out;
}

}  // namespace pbr
