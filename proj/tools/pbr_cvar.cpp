#include "pbr/asymptotics.h"
#include "pbr/config.h"
#include "pbr/errors.h"
#include "pbr/harness.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override master_seed");
    cmd->add_option("--threads", o.threads, "override worker count")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "override output_dir");
}

pbr::ExperimentConfig load(const Overrides& o) {
    pbr::ExperimentConfig c = pbr::load_config(o.config_path);
    if (o.seed) c.master_seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.out) c.output_dir = *o.out;
    return c;
}

int cmd_run(const Overrides& o) {
    const pbr::ExperimentConfig c = load(o);
    const pbr::ExperimentResult r = pbr::run_experiment(c);
    pbr::write_outputs(c, r);
    int invalid = 0;
    for (const auto& row : r.summary.rows) invalid += row.valid ? 0 : 1;
    std::cout << "wrote " << r.trials.size() << " trial records and " << r.summary.rows.size()
              << " summary rows to " << c.output_dir << "\n";
    if (invalid > 0) std::cout << invalid << " summary cells flagged invalid\n";
    return 0;
}

int cmd_theory(const Overrides& o, bool simulate) {
    const pbr::ExperimentConfig c = load(o);
    const auto* g = std::get_if<pbr::GaussianModel>(&c.model);
    if (!g) throw pbr::InputError("theory: model.type must be gaussian");
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);

    std::vector<pbr::TheoryRow> rows;
    const double G = pbr::gaussian_g_constant(c.beta);
    for (double l0 : c.theory.lambda0_grid) {
        for (double l1 : c.theory.lambda1_grid) {
            const pbr::ThetaZero th = pbr::population_dualized_solution(g->mu, g->sigma, c.beta, l0, l1);
            const pbr::AsymptoticCov cov = l1 > 0.0 ? pbr::matrix_a1_b1(g->mu, g->sigma, c.beta, l0, l1, th)
                                                    : pbr::matrix_a0_b0(g->mu, g->sigma, c.beta, l0, th);
            for (Eigen::Index n : c.theory.n_grid) {
                const pbr::FrontierStd s = pbr::frontier_std(cov, g->mu, g->sigma, G, static_cast<double>(n));
                rows.push_back({static_cast<double>(n), l0, l1, s.std_mean, s.std_cvar});
            }
        }
    }
    {
        std::ofstream os(fs::path(c.output_dir) / "theory.csv");
        pbr::write_theory_csv(os, rows);
    }
    if (simulate) {
        const auto sim = pbr::theory_vs_sim(c, c.theory.lambda0, c.theory.lambda1);
        std::ofstream os(fs::path(c.output_dir) / "theory_vs_sim.csv");
        os << std::setprecision(17);
        os << "n,lambda0,lambda1,sim_std_mean,sim_std_cvar,theory_std_mean,theory_std_cvar,trial_count\n";
        for (const auto& r : sim) {
            os << r.n << ',' << c.theory.lambda0 << ',' << c.theory.lambda1 << ',' << r.sim_std_mean << ','
               << r.sim_std_cvar << ',' << r.theory_std_mean << ',' << r.theory_std_cvar << ',' << r.trial_count
               << '\n';
        }
    }
    std::cout << "wrote theory output to " << c.output_dir << "\n";
    return 0;
}

int cmd_cv(const Overrides& o) {
    const pbr::ExperimentConfig c = load(o);
    const pbr::ReturnsSample s = pbr::sample(c.model, c.n, c.master_seed);
    double R = c.cv.R;
    if (!c.cv.has_R) {
        const auto grid = c.r_grid.empty() ? pbr::default_r_grid(c.model) : c.r_grid;
        R = grid[grid.size() / 2];
    }
    const pbr::CvResult res = pbr::select_penalty_ratios(s, c.beta, R, c.cv.grid, c.cv.folds);
    nlohmann::json out;
    out["R"] = R;
    out["folds"] = c.cv.folds;
    out["selected"] = {res.selected.r1, res.selected.r2};
    auto& scores = out["scores"] = nlohmann::json::array();
    for (const auto& sc : res.scores) {
        scores.push_back({{"r1", sc.ratios.r1},
                          {"r2", sc.ratios.r2},
                          {"feasible", sc.feasible},
                          {"score", sc.feasible ? nlohmann::json(sc.score) : nlohmann::json(nullptr)}});
    }
    std::filesystem::create_directories(c.output_dir);
    std::ofstream os(std::filesystem::path(c.output_dir) / "cv.json");
    os << out.dump(2) << '\n';
    std::cout << "selected (r1, r2) = (" << res.selected.r1 << ", " << res.selected.r2 << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PBR mean-CVaR portfolio experiments"};
    app.require_subcommand(1);
    Overrides run_o, theory_o, cv_o;
    bool no_sim = false;
    auto* run = app.add_subcommand("run", "Monte-Carlo frontier experiment");
    add_common(run, run_o);
    auto* theory = app.add_subcommand("theory", "asymptotic error bars, optionally against simulation");
    add_common(theory, theory_o);
    theory->add_flag("--no-sim", no_sim, "skip the simulation comparison");
    auto* cv = app.add_subcommand("cv", "cross-validated choice of penalty ratios");
    add_common(cv, cv_o);

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(run_o);
        if (theory->parsed()) return cmd_theory(theory_o, !no_sim);
        if (cv->parsed()) return cmd_cv(cv_o);
    } catch (const pbr::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
