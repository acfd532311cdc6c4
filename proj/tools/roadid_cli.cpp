#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "roadid/commands.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> estimator;
    std::optional<int> N;
    std::optional<double> speed_kmh;
    std::optional<double> qx, qr;
    std::optional<int> k;
    std::string measurements, truth;
};

roadid::RunConfig resolve(const Overrides& o) {
    roadid::RunConfig c = o.config.empty() ? roadid::RunConfig{} : roadid::load_run_config(o.config);
    if (!o.out.empty()) c.out = o.out;
    if (o.seed) c.apply_seed(*o.seed);
    if (o.workers) c.workers = *o.workers;
    if (o.estimator) c.estimator = roadid::parse_estimator(*o.estimator);
    if (o.N) c.N = *o.N;
    if (o.speed_kmh) c.scenario.speed_kmh = *o.speed_kmh;
    if (o.qx) c.Qx = *o.qx;
    if (o.qr) c.Qr = *o.qr;
    if (o.k) {
        c.truncation.mode = roadid::TruncationSetting::Mode::count;
        c.truncation.k = *o.k;
    }
    if (!o.measurements.empty()) c.measurements = o.measurements;
    if (!o.truth.empty()) c.truth = o.truth;
    c.resolve();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Road-profile identification from axle accelerations"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "output directory");
    app.add_option("--seed", o.seed, "road seed (sensor noise uses seed + 1)");
    app.add_option("--workers", o.workers, "worker threads for tune/compare (default: all cores)")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "simulate a drive and write profile, inputs and measurements");
    auto* estimate = app.add_subcommand("estimate", "run one estimator on measurements");
    auto* tune = app.add_subcommand("tune", "grid-search the estimator settings");
    auto* sweep = app.add_subcommand("sweep", "window-length sweep of the smoother");
    auto* compare = app.add_subcommand("compare", "run us, dkf and mvus on one scenario");

    for (auto* sub : {simulate, estimate, tune, sweep, compare}) {
        sub->add_option("--speed-kmh", o.speed_kmh, "vehicle speed [km/h]")->check(CLI::PositiveNumber);
    }
    for (auto* sub : {estimate, tune, sweep, compare}) {
        sub->add_option("--measurements", o.measurements, "measurement CSV (default: simulate the configured scenario)");
        sub->add_option("--truth", o.truth, "ground-truth input series CSV");
        sub->add_option("-N,--window", o.N, "smoothing window length")->check(CLI::NonNegativeNumber);
        sub->add_option("--qx", o.qx, "process-noise level Qx");
    }
    for (auto* sub : {estimate, tune}) sub->add_option("--estimator", o.estimator, "us | dkf | mvus");
    for (auto* sub : {estimate, sweep, compare}) {
        sub->add_option("--qr", o.qr, "input random-walk level Qr (dkf)");
        sub->add_option("-k,--keep", o.k, "retained singular values (us)")->check(CLI::PositiveNumber);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const roadid::RunConfig cfg = resolve(o);
        roadid::CommandResult res;
        if (*simulate) res = roadid::cmd_simulate(cfg);
        else if (*estimate) res = roadid::cmd_estimate(cfg);
        else if (*tune) res = roadid::cmd_tune(cfg);
        else if (*sweep) res = roadid::cmd_sweep(cfg);
        else res = roadid::cmd_compare(cfg);
        std::cout << res.summary.dump(2) << '\n';
        for (const auto& f : res.files) std::cout << cfg.out << '/' << f << '\n';
        return 0;
    } catch (const roadid::Error& e) {
        std::cerr << "roadid: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "roadid: unexpected error: " << e.what() << '\n';
        return 3;
    }
}
