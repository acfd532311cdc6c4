#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadid/config.hpp"
#include "roadid/dual_kalman.hpp"
#include "roadid/evaluation.hpp"
#include "roadid/mvu_smoother.hpp"
#include "roadid/scenario.hpp"
#include "roadid/svg.hpp"
#include "roadid/universal_smoother.hpp"

namespace roadid {

/// Files written by a command, relative to its output directory.
struct CommandResult {
    std::vector<std::string> files;
    nlohmann::json summary = nlohmann::json::object();
};

namespace detail {

inline std::filesystem::path prepare_out(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw IoError("output directory '" + dir + "' is not writable");
    }
    fs::remove(probe, ec);
    return fs::path(dir);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << j.dump(2) << '\n';
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

/// Writes config.json (re-runnable with --config) and manifest.json.
inline void write_manifest(const std::filesystem::path& out, const std::string& command, const RunConfig& cfg,
                           CommandResult& res) {
    write_json(out / "config.json", to_json(cfg));
    res.files.push_back("config.json");
    nlohmann::json m;
    m["command"] = command;
    m["tool"] = "roadid";
    m["tool_version"] = kToolVersion;
    m["config"] = to_json(cfg);
    m["seeds"] = {{"profile", cfg.scenario.profile_seed}, {"noise", cfg.scenario.noise.seed}};
    res.files.push_back("manifest.json");
    m["outputs"] = res.files;
    m["summary"] = res.summary;
    write_json(out / "manifest.json", m);
}

inline void write_text_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << csv::join(header) << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::string cell = r[i];
            if (cell.find_first_of(",\"\n") != std::string::npos) {
                std::string q = "\"";
                for (char c : cell) q += (c == '"') ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
                cell = q + "\"";
            }
            f << (i ? "," : "") << cell;
        }
        f << '\n';
    }
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline std::vector<double> head(const std::vector<double>& v, std::size_t n) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

}  // namespace detail

/// Measurements to work on plus whatever ground truth is known about them.
struct RunData {
    MeasurementSeries measurements;
    std::optional<InputSeries> truth;
    std::optional<Scenario> scenario;
    double speed = 0.0;  ///< [m/s]

    [[nodiscard]] double sample_rate() const { return 1.0 / measurements.dt; }
};

/// Loads the configured measurement file, or simulates the configured scenario when none is given.
inline RunData load_or_simulate(const RunConfig& cfg) {
    RunData d;
    d.speed = cfg.scenario.speed();
    if (!cfg.measurements.empty()) {
        if (!std::filesystem::exists(cfg.measurements)) throw IoError("measurement file '" + cfg.measurements + "' does not exist");
        d.measurements = load_measurements_csv(cfg.measurements);
        d.measurements.speed = d.speed;
        if (!cfg.truth.empty()) {
            if (!std::filesystem::exists(cfg.truth)) throw IoError("ground-truth file '" + cfg.truth + "' does not exist");
            d.truth = load_inputs_csv(cfg.truth, d.speed);
        }
    } else {
        Scenario s = build_scenario(cfg.scenario, cfg.vehicle, cfg.selection());
        d.measurements = s.measurements;
        d.truth = s.inputs;
        d.scenario = std::move(s);
    }
    return d;
}

inline DiscreteSystem system_for(const RunConfig& cfg, const RunData& d) {
    return build_discrete_system(cfg.vehicle, d.measurements.selection, d.measurements.dt);
}

/// Runs one estimator with the configured (possibly per-estimator) settings.
inline EstimationResult run_estimator(EstimatorKind kind, const RunConfig& cfg, const DiscreteSystem& sys,
                                      const MeasurementSeries& meas, std::optional<int> N_override = std::nullopt) {
    const NoiseConfig noise = cfg.noise(kind);
    const int N = N_override.value_or(cfg.N);
    switch (kind) {
        case EstimatorKind::us: return run_us(sys, meas, noise, cfg.truncation.resolve(N, static_cast<int>(sys.inputs())), N);
        case EstimatorKind::dkf: return run_dkf(sys, meas, noise);
        case EstimatorKind::mvus: return run_mvus(sys, meas, noise, N);
    }
    throw InvalidParameter("unknown estimator");
}

/// Metrics, accuracy (when truth is known) and spectra of one run.
inline EvaluationReport evaluate_run(const RunConfig& cfg, const RunData& d, const EstimationResult& e) {
    EvaluationReport rep;
    const Metrics m = tuning_metrics(e, d.measurements.y);
    rep.sigma_e = m.sigma_e;
    rep.e_u = m.e_u;
    rep.e_r = m.e_r;
    rep.cov_trace = e.trace_Pr;
    rep.wall_time = e.wall_time;
    if (d.truth) {
        const WheelNrmse w = input_accuracy(*d.truth, e, d.sample_rate(), d.speed, cfg.cutoff_cycles_per_m);
        rep.nrmse_front = w.front;
        rep.nrmse_rear = w.rear;
        rep.nrmse_mean = w.mean;
    }
    const double spacing = d.speed * d.measurements.dt;
    if (e.steps() >= 16 && e.r_hat.cols() == 2) {
        rep.spectrum_front = periodogram_spatial(column(e.r_hat, 0), spacing, cfg.spectrum_segment);
        rep.spectrum_rear = periodogram_spatial(column(e.r_hat, 1), spacing, cfg.spectrum_segment);
    }
    return rep;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"sigma_e", finite_or_null(r.sigma_e)},
            {"e_u", finite_or_null(r.e_u)},
            {"e_r", finite_or_null(r.e_r)},
            {"nrmse_front", finite_or_null(r.nrmse_front)},
            {"nrmse_rear", finite_or_null(r.nrmse_rear)},
            {"nrmse_mean", finite_or_null(r.nrmse_mean)},
            {"final_cov_trace", r.cov_trace.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.cov_trace.back())},
            {"wall_time_s", r.wall_time}};
}

// =============================================================================
// simulate
// =============================================================================

inline CommandResult cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    const auto out = detail::prepare_out(cfg.out);
    const Scenario s = build_scenario(cfg.scenario, cfg.vehicle, cfg.selection());
    CommandResult res;
    save_profile_csv((out / "profile.csv").string(), s.profile);
    save_inputs_csv((out / "inputs.csv").string(), s.inputs);
    save_measurements_csv((out / "measurements.csv").string(), s.measurements);
    res.files = {"profile.csv", "inputs.csv", "measurements.csv"};
    if (cfg.svg) {
        svg::LineChart c{"Road profile", "distance [m]", "height [mm]", {}};
        std::vector<double> mm;
        for (double h : s.profile.heights) mm.push_back(h * 1e3);
        c.series.push_back({"profile", s.profile.distances, mm});
        svg::write((out / "profile.svg").string(), c);
        res.files.push_back("profile.svg");
    }
    res.summary = {{"profile_points", s.profile.size()}, {"measurement_rows", s.measurements.steps()}};
    detail::write_manifest(out, "simulate", cfg, res);
    return res;
}

// =============================================================================
// estimate
// =============================================================================

inline CommandResult cmd_estimate(const RunConfig& cfg) {
    cfg.validate();
    const RunData d = load_or_simulate(cfg);
    const DiscreteSystem sys = system_for(cfg, d);
    const EstimationResult e = run_estimator(cfg.estimator, cfg, sys, d.measurements);
    const EvaluationReport rep = evaluate_run(cfg, d, e);

    const auto out = detail::prepare_out(cfg.out);
    CommandResult res;
    save_estimate_csv((out / "estimate.csv").string(), e);
    csv::write((out / "cov_trace.csv").string(), {"t_s", "trace_Pr", "trace_P"}, {&e.times, &e.trace_Pr, &e.trace_P});
    res.files = {"estimate.csv", "cov_trace.csv"};
    if (!rep.spectrum_front.frequency.empty()) {
        std::vector<std::string> header{"freq_cycles_per_m", "est_front", "est_rear"};
        std::vector<const std::vector<double>*> cols{&rep.spectrum_front.frequency, &rep.spectrum_front.magnitude,
                                                     &rep.spectrum_rear.magnitude};
        Spectrum tf, tr;
        if (d.truth) {
            const double spacing = d.speed * d.measurements.dt;
            const auto n = static_cast<std::size_t>(e.steps());
            tf = periodogram_spatial(detail::head(d.truth->r_front, n), spacing, cfg.spectrum_segment);
            tr = periodogram_spatial(detail::head(d.truth->r_rear, n), spacing, cfg.spectrum_segment);
            header.insert(header.end(), {"true_front", "true_rear"});
            cols.insert(cols.end(), {&tf.magnitude, &tr.magnitude});
        }
        csv::write((out / "spectrum.csv").string(), header, cols);
        res.files.push_back("spectrum.csv");
    }
    if (d.truth) {
        detail::write_json(out / "report.json", to_json(rep));
        res.files.push_back("report.json");
    }
    if (cfg.svg) {
        svg::LineChart c{"Input estimate (" + e.method + ")", "time [s]", "height [mm]", {}};
        auto mm = [](std::vector<double> v) {
            for (double& x : v) x *= 1e3;
            return v;
        };
        if (d.truth) {
            const auto n = static_cast<std::size_t>(e.steps());
            c.series.push_back({"true front", e.times, mm(detail::head(d.truth->r_front, n))});
            c.series.push_back({"true rear", e.times, mm(detail::head(d.truth->r_rear, n))});
        }
        c.series.push_back({"front", e.times, mm(column(e.r_hat, 0))});
        c.series.push_back({"rear", e.times, mm(column(e.r_hat, 1))});
        svg::write((out / "estimate.svg").string(), c);
        svg::LineChart t{"Input covariance trace", "time [s]", "trace", {{e.method, e.times, e.trace_Pr}}, false, true};
        svg::write((out / "cov_trace.svg").string(), t);
        res.files.insert(res.files.end(), {"estimate.svg", "cov_trace.svg"});
    }
    res.summary = to_json(rep);
    res.summary["estimator"] = e.method;
    res.summary["steps"] = e.steps();
    detail::write_manifest(out, "estimate", cfg, res);
    return res;
}

// =============================================================================
// tune
// =============================================================================

/**
 * @brief Grid search of the configured estimator's noise/truncation settings.
 *
 * The smoother is searched over (log10 Qx, k), the dual filter over
 * (log10 Qx, log10 Qr) and the MVU smoother over log10 Qx alone.
 */
inline GridResult tune_grid(const RunConfig& cfg, const RunData& d, const DiscreteSystem& sys) {
    const std::vector<double> qx = cfg.grid.qx_exponents.values();
    std::vector<double> second{0.0};
    std::optional<ExtendedSystem> ext;
    if (cfg.estimator == EstimatorKind::us) {
        second.clear();
        for (int k : cfg.grid.k_values(cfg.N)) second.push_back(k);
    } else if (cfg.estimator == EstimatorKind::dkf) {
        second = cfg.grid.qr_exponents.values();
    }
    if (cfg.estimator != EstimatorKind::dkf) ext = build_extended(sys, cfg.N);

    const MeasurementSeries& meas = d.measurements;
    return grid_search(
        qx, second,
        [&](double lq, double s) {
            NoiseConfig n = cfg.noise(cfg.estimator);
            n.Qx = std::pow(10.0, lq);
            EstimationResult e;
            switch (cfg.estimator) {
                case EstimatorKind::us: e = run_us(*ext, meas, n, TruncationPolicy::keep(static_cast<int>(s))); break;
                case EstimatorKind::dkf:
                    n.Qr = std::pow(10.0, s);
                    e = run_dkf(sys, meas, n);
                    break;
                case EstimatorKind::mvus: e = run_mvus(*ext, meas, n); break;
            }
            return tuning_metrics(e, meas.y);
        },
        cfg.worker_count());
}

inline CommandResult cmd_tune(const RunConfig& cfg) {
    cfg.validate();
    const RunData d = load_or_simulate(cfg);
    const DiscreteSystem sys = system_for(cfg, d);
    const auto out = detail::prepare_out(cfg.out);
    const GridResult g = tune_grid(cfg, d, sys);
    const std::string second_name = cfg.estimator == EstimatorKind::us ? "k" : cfg.estimator == EstimatorKind::dkf ? "log10_qr" : "unused";

    CommandResult res;
    save_surface_csv((out / "surface.csv").string(), g, second_name);
    res.files.push_back("surface.csv");

    std::vector<std::vector<std::string>> failures;
    for (const auto& p : g.surface)
        if (!p.failure.empty()) failures.push_back({csv::format(p.log10_qx), csv::format(p.second), p.failure});
    if (!failures.empty()) {
        detail::write_text_csv(out / "failures.csv", {"log10_qx", second_name, "message"}, failures);
        res.files.push_back("failures.csv");
    }

    const GridPoint& b = g.best_point();
    std::vector<std::string> best_header{"estimator", "N", "log10_qx", second_name, "sigma_e", "e_u", "e_r"};
    std::vector<std::string> best_row{to_string(cfg.estimator), std::to_string(cfg.N), csv::format(b.log10_qx),
                                      csv::format(b.second), csv::format(b.sigma_e), csv::format(b.e_u), csv::format(b.e_r)};
    detail::write_text_csv(out / "best.csv", best_header, {best_row});
    res.files.push_back("best.csv");

    if (cfg.svg) {
        std::vector<double> x, y, z;
        for (const auto& p : g.surface) {
            x.push_back(p.log10_qx);
            y.push_back(p.second);
            z.push_back(p.sigma_e);
        }
        svg::write_heatmap((out / "surface.svg").string(), "Tuning error", "log10 Qx", second_name, x, y, z);
        res.files.push_back("surface.svg");
    }
    res.summary = {{"estimator", to_string(cfg.estimator)},
                   {"points", g.surface.size()},
                   {"failed_points", failures.size()},
                   {"best", {{"log10_qx", b.log10_qx}, {second_name, b.second}, {"sigma_e", b.sigma_e}}}};
    detail::write_manifest(out, "tune", cfg, res);
    return res;
}

// =============================================================================
// sweep
// =============================================================================

/// Window-length sweep of the smoother; runs are timed one after another so wall times are comparable.
inline CommandResult cmd_sweep(const RunConfig& cfg) {
    cfg.validate();
    const RunData d = load_or_simulate(cfg);
    if (!d.truth) throw InvalidParameter("sweep: ground truth is required (simulate, or set 'truth')");
    const DiscreteSystem sys = system_for(cfg, d);
    const auto out = detail::prepare_out(cfg.out);
    const auto rows = window_sweep(cfg.sweep_N, [&](int N) {
        const EstimationResult e = run_estimator(EstimatorKind::us, cfg, sys, d.measurements, N);
        return std::make_pair(input_accuracy(*d.truth, e, d.sample_rate(), d.speed, cfg.cutoff_cycles_per_m).mean, e.wall_time);
    });
    std::size_t ok = 0;
    for (const auto& r : rows) ok += r.failure.empty() ? 1 : 0;
    if (ok == 0) throw NumericError("sweep: every window length failed (" + rows.front().failure + ")");

    CommandResult res;
    save_sweep_csv((out / "sweep.csv").string(), rows);
    res.files.push_back("sweep.csv");
    if (cfg.svg) {
        std::vector<double> n, e, t;
        for (const auto& r : rows) {
            n.push_back(r.N);
            e.push_back(r.nrmse);
            t.push_back(r.wall_time);
        }
        svg::write((out / "sweep_nrmse.svg").string(), svg::LineChart{"Accuracy vs window length", "N", "NRMSE", {{"us", n, e}}});
        svg::write((out / "sweep_time.svg").string(), svg::LineChart{"Cost vs window length", "N", "wall time [s]", {{"us", n, t}}});
        res.files.insert(res.files.end(), {"sweep_nrmse.svg", "sweep_time.svg"});
    }
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows)
        table.push_back({{"N", r.N},
                         {"nrmse", std::isfinite(r.nrmse) ? nlohmann::json(r.nrmse) : nlohmann::json(nullptr)},
                         {"wall_time_s", std::isfinite(r.wall_time) ? nlohmann::json(r.wall_time) : nlohmann::json(nullptr)},
                         {"failure", r.failure}});
    res.summary = {{"rows", table}};
    detail::write_manifest(out, "sweep", cfg, res);
    return res;
}

// =============================================================================
// compare
// =============================================================================

struct ComparisonRow {
    EstimatorKind kind = EstimatorKind::us;
    std::optional<EstimationResult> result;
    std::optional<EvaluationReport> report;
    std::string failure;
};

/// Runs all three estimators on one data set; failures are recorded per estimator.
inline std::vector<ComparisonRow> compare_estimators(const RunConfig& cfg, const RunData& d, const DiscreteSystem& sys) {
    std::vector<ComparisonRow> rows(3);
    rows[0].kind = EstimatorKind::us;
    rows[1].kind = EstimatorKind::dkf;
    rows[2].kind = EstimatorKind::mvus;
    parallel_for(rows.size(), cfg.worker_count(), [&](std::size_t i) {
        try {
            rows[i].result = run_estimator(rows[i].kind, cfg, sys, d.measurements);
            rows[i].report = evaluate_run(cfg, d, *rows[i].result);
        } catch (const std::exception& ex) {
            rows[i].result.reset();
            rows[i].report.reset();
            rows[i].failure = ex.what();
        }
    });
    return rows;
}

inline CommandResult cmd_compare(const RunConfig& cfg) {
    cfg.validate();
    const RunData d = load_or_simulate(cfg);
    const DiscreteSystem sys = system_for(cfg, d);
    const auto out = detail::prepare_out(cfg.out);
    const auto rows = compare_estimators(cfg, d, sys);

    std::size_t common = static_cast<std::size_t>(d.measurements.steps());
    std::size_t ok = 0;
    for (const auto& r : rows)
        if (r.result) {
            common = std::min(common, static_cast<std::size_t>(r.result->steps()));
            ++ok;
        }
    if (ok == 0) throw NumericError("compare: every estimator failed (" + rows.front().failure + ")");

    CommandResult res;
    std::vector<std::vector<std::string>> summary;
    auto cell = [](double v) { return std::isfinite(v) ? csv::format(v) : std::string(); };
    for (const auto& r : rows) {
        if (r.report)
            summary.push_back({to_string(r.kind), "OK", cell(r.report->nrmse_front), cell(r.report->nrmse_rear),
                               cell(r.report->nrmse_mean), cell(r.report->sigma_e), cell(r.report->e_u), cell(r.report->e_r),
                               cell(r.report->wall_time), ""});
        else
            summary.push_back({to_string(r.kind), "FAILED", "", "", "", "", "", "", "", r.failure});
    }
    detail::write_text_csv(out / "summary.csv",
                           {"estimator", "status", "nrmse_front", "nrmse_rear", "nrmse_mean", "sigma_e", "e_u", "e_r",
                            "wall_time_s", "message"},
                           summary);
    res.files.push_back("summary.csv");

    // Overlays over the steps every successful estimator covers.
    std::vector<std::string> header{"t_s", "distance_m"};
    std::vector<std::vector<double>> cols;
    cols.push_back(detail::head(d.measurements.times, common));
    cols.emplace_back(common);
    for (std::size_t i = 0; i < common; ++i) cols[1][i] = d.speed * cols[0][i];
    if (d.truth) {
        header.insert(header.end(), {"r_front_true", "r_rear_true"});
        cols.push_back(detail::head(d.truth->r_front, common));
        cols.push_back(detail::head(d.truth->r_rear, common));
    }
    std::vector<std::string> trace_header{"t_s"};
    std::vector<std::vector<double>> trace_cols{detail::head(d.measurements.times, common)};
    for (const auto& r : rows) {
        if (!r.result) continue;
        const std::string name = to_string(r.kind);
        header.insert(header.end(), {"r_front_" + name, "r_rear_" + name});
        cols.push_back(detail::head(column(r.result->r_hat, 0), common));
        cols.push_back(detail::head(column(r.result->r_hat, 1), common));
        trace_header.push_back("trace_Pr_" + name);
        trace_cols.push_back(detail::head(r.result->trace_Pr, common));
    }
    auto ptrs = [](const std::vector<std::vector<double>>& v) {
        std::vector<const std::vector<double>*> p;
        for (const auto& c : v) p.push_back(&c);
        return p;
    };
    csv::write((out / "overlay.csv").string(), header, ptrs(cols));
    csv::write((out / "cov_traces.csv").string(), trace_header, ptrs(trace_cols));
    res.files.insert(res.files.end(), {"overlay.csv", "cov_traces.csv"});

    // Spectra of every overlay column except time and distance.
    const double spacing = d.speed * d.measurements.dt;
    if (common >= 16) {
        std::vector<std::string> sh{"freq_cycles_per_m"};
        std::vector<std::vector<double>> sc;
        for (std::size_t c = 2; c < cols.size(); ++c) {
            const Spectrum s = periodogram_spatial(cols[c], spacing, cfg.spectrum_segment);
            if (sc.empty()) sc.push_back(s.frequency);
            sh.push_back(header[c]);
            sc.push_back(s.magnitude);
        }
        csv::write((out / "spectra.csv").string(), sh, ptrs(sc));
        res.files.push_back("spectra.csv");

        if (cfg.svg) {
            for (int wheel = 0; wheel < 2; ++wheel) {
                const std::string side = wheel == 0 ? "front" : "rear";
                svg::LineChart p{"Profile overlay (" + side + ")", "distance [m]", "height [mm]", {}};
                svg::LineChart s{"Spatial spectrum (" + side + ")", "spatial frequency [cycles/m]", "power [m^2]", {}, true, true};
                for (std::size_t c = 2; c < cols.size(); ++c) {
                    if (header[c].find("_" + side + "_") == std::string::npos) continue;
                    std::vector<double> mm = cols[c];
                    for (double& v : mm) v *= 1e3;
                    const std::string label = header[c].substr(header[c].rfind('_') + 1);
                    p.series.push_back({label, cols[1], mm});
                    s.series.push_back({label, sc[0], sc[c - 1]});
                }
                svg::write((out / ("overlay_" + side + ".svg")).string(), p);
                svg::write((out / ("spectrum_" + side + ".svg")).string(), s);
                res.files.insert(res.files.end(), {"overlay_" + side + ".svg", "spectrum_" + side + ".svg"});
            }
            svg::LineChart t{"Input covariance trace", "time [s]", "trace", {}, false, true};
            for (std::size_t c = 1; c < trace_cols.size(); ++c)
                t.series.push_back({trace_header[c].substr(9), trace_cols[0], trace_cols[c]});
            svg::write((out / "cov_traces.svg").string(), t);
            res.files.push_back("cov_traces.svg");
        }
    }

    res.summary = nlohmann::json::object();
    for (const auto& r : rows)
        res.summary[to_string(r.kind)] = r.report ? to_json(*r.report) : nlohmann::json{{"failed", r.failure}};
    detail::write_manifest(out, "compare", cfg, res);
    return res;
}

}  // namespace roadid
