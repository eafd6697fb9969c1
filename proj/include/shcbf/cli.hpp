#pragma once

// Subcommands behind the shcbf executable. Each returns the process exit code:
// 0 safe, 2 safety violation, 1 configuration or runtime error, 3 assumption failure.

#include "shcbf/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace shcbf::cli {

enum ExitCode : int { exit_safe = 0, exit_error = 1, exit_violation = 2, exit_assumption = 3 };

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::string plot_script;
    std::vector<double> frequencies;
    std::string constants_out;
    std::int64_t max_compare_steps = 4'000'000;
};

inline constexpr double violation_tol = 1e-9;

/// "out/trace.csv" + "2Hz" -> "out/trace_2Hz.csv"
inline std::string with_suffix(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    std::filesystem::path out = p.parent_path() / (p.stem().string() + "_" + suffix + p.extension().string());
    return out.string();
}

inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    body(os);
    if (!os) throw ConfigError("write failed for '" + path + "'");
}

inline void write_plot_script(const std::string& path, const std::vector<std::string>& traces) {
    write_file(path, [&](std::ostream& os) {
        os << "set datafile separator ','\n";
        os << "set key autotitle columnhead\n";
        os << "set xlabel 't [s]'\n";
        os << "set ylabel 'h(x)'\n";
        os << "set grid\n";
        os << "plot ";
        for (std::size_t i = 0; i < traces.size(); ++i) {
            if (i) os << ", \\\n     ";
            os << "'" << traces[i] << "' using 1:(column('h')) with lines title '" << traces[i] << "'";
        }
        os << "\n";
    });
}

inline bool is_safe(const AnalysisReport& rep) { return rep.min_h >= -violation_tol; }

/// Bounds from the config when supplied, otherwise estimated over the region for
/// the plain filter, with the sigmoid slope taken from the tuning.
struct ConstantsResult {
    BoundSet bounds;
    std::optional<AssumptionReport> assumptions;
    TuningReport tuning;
    std::optional<double> practical;
    std::optional<double> violation_free;
    std::string practical_error;
    std::string violation_free_error;
};

inline ConstantsResult compute_constants(const RunConfig& cfg) {
    ConstantsResult res;
    const acc::AccScenario& s = cfg.scenario;
    const ClassKappa alpha = ClassKappa::linear(s.alpha_slope);
    if (cfg.bounds) {
        res.bounds = *cfg.bounds;
        res.tuning = validate_tuning(s.tuning, res.bounds, alpha);
    } else {
        s.params.validate();
        s.region.validate(3);
        const CbfQpFilter filter = acc::make_filter(s.params, alpha);
        const Controller plain = [&filter](const State& x) { return solve_cbf_qp(filter, x); };
        const RegionSamples samples(s.region, filter.barrier);
        res.assumptions = check_assumptions(samples, filter.dynamics, plain, filter.barrier, s.tuning.sigmoid());
        res.bounds = res.assumptions->bounds;
        if (res.assumptions->all_hold()) {
            res.tuning = validate_tuning(s.tuning, res.bounds, alpha,
                                         BandContext{&filter.dynamics, &filter.barrier, &samples});
        }
    }
    try {
        res.practical = practical_sampling_time(res.bounds, s.tuning.margin);
    } catch (const ConfigError& e) {
        res.practical_error = e.what();
    }
    try {
        res.violation_free = violation_free_sampling_time(res.bounds, s.tuning.epsilon, s.tuning.margin);
    } catch (const ConfigError& e) {
        res.violation_free_error = e.what();
    }
    return res;
}

inline void print_bounds(std::ostream& os, const BoundSet& b) {
    os << std::setprecision(17);
    auto kv = [&](const char* k, double v) { os << std::left << std::setw(18) << k << v << '\n'; };
    kv("b_f", b.b_f);
    kv("b_g", b.b_g);
    kv("b_k", b.b_k);
    kv("lambda", b.lambda);
    kv("mu", b.mu);
    kv("m_lip", b.m_lip);
    kv("l_k", b.l_k);
    kv("l_sigma", b.l_sigma);
    kv("safety_factor", b.safety_factor);
}

// ---------------------------------------------------------------------------

inline int simulate(const Options& opt, std::ostream& out) {
    const RunConfig cfg = load_config(opt.config, opt.overrides);
    const Scenario sc = cfg.scenario.build();
    const Trace tr = run(sc);
    const AnalysisReport rep = analyze(tr, violation_tol);
    if (!cfg.output.trace.empty()) write_file(cfg.output.trace, [&](std::ostream& os) { write_trace_csv(os, tr); });
    if (!cfg.output.summary.empty()) write_file(cfg.output.summary, [&](std::ostream& os) { write_summary(os, rep); });
    if (!opt.plot_script.empty()) {
        if (cfg.output.trace.empty()) throw ConfigError("--plot-script needs output.trace to be set");
        write_plot_script(opt.plot_script, {cfg.output.trace});
    }
    out << "scenario " << cfg.scenario.name << '\n';
    write_summary(out, rep);
    return is_safe(rep) ? exit_safe : exit_violation;
}

struct SweepRow {
    double frequency = 0.0;
    AnalysisReport report;
    std::string trace_path;
};

inline int sweep(const Options& opt, std::ostream& out) {
    if (opt.frequencies.empty()) throw ConfigError("sweep: the frequency list is empty");
    for (double f : opt.frequencies) {
        if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("sweep: frequencies must be positive");
    }
    const RunConfig cfg = load_config(opt.config, opt.overrides);
    std::vector<double> freqs = opt.frequencies;
    std::sort(freqs.begin(), freqs.end());
    freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());

    std::vector<std::future<SweepRow>> jobs;
    for (double f : freqs) {
        jobs.push_back(std::async(std::launch::async, [&cfg, f] {
            acc::AccScenario s = cfg.scenario;
            s.schedule = HoldSchedule::periodic(1.0 / f);
            s.name = cfg.scenario.name + "-" + acc::frequency_label(f);
            const Scenario sc = s.build();
            const Trace tr = run(sc);
            SweepRow row{f, analyze(tr, violation_tol), {}};
            if (!cfg.output.trace.empty()) {
                row.trace_path = with_suffix(cfg.output.trace, acc::frequency_label(f));
                write_file(row.trace_path, [&](std::ostream& os) { write_trace_csv(os, tr); });
            }
            return row;
        }));
    }
    std::vector<SweepRow> rows;
    for (auto& j : jobs) rows.push_back(j.get());

    // smallest tested frequency from which every higher tested frequency is safe
    std::optional<double> threshold;
    for (std::size_t i = rows.size(); i-- > 0;) {
        if (!is_safe(rows[i].report)) break;
        threshold = rows[i].frequency;
    }

    out << std::setprecision(17);
    out << "frequency,min_h,violation_time,num_events\n";
    for (const auto& r : rows) {
        out << r.frequency << ',' << r.report.min_h << ',';
        if (r.report.violation_time) {
            out << *r.report.violation_time;
        } else {
            out << "none";
        }
        out << ',' << r.report.num_events << '\n';
    }
    out << "threshold_frequency ";
    if (threshold) {
        out << *threshold << '\n';
    } else {
        out << "none\n";
    }
    if (!cfg.output.summary.empty()) {
        write_file(cfg.output.summary, [&](std::ostream& os) {
            os << std::setprecision(17) << "frequency,min_h,violation_time,num_events\n";
            for (const auto& r : rows) {
                os << r.frequency << ',' << r.report.min_h << ',';
                if (r.report.violation_time) {
                    os << *r.report.violation_time;
                } else {
                    os << "none";
                }
                os << ',' << r.report.num_events << '\n';
            }
        });
    }
    if (!opt.plot_script.empty()) {
        if (cfg.output.trace.empty()) throw ConfigError("--plot-script needs output.trace to be set");
        std::vector<std::string> traces;
        for (const auto& r : rows) traces.push_back(r.trace_path);
        write_plot_script(opt.plot_script, traces);
    }
    const bool all_safe = std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return is_safe(r.report); });
    return all_safe ? exit_safe : exit_violation;
}

inline int constants(const Options& opt, std::ostream& out) {
    const RunConfig cfg = load_config(opt.config, opt.overrides);
    const ConstantsResult res = compute_constants(cfg);
    out << "# bounds (" << (cfg.bounds ? "supplied" : "estimated") << ")\n";
    print_bounds(out, res.bounds);
    if (res.assumptions) {
        out << "# assumptions\n";
        for (const auto& c : res.assumptions->checks) {
            out << (c.holds ? "ok    " : "FAIL  ") << std::left << std::setw(28) << c.name << c.detail << '\n';
        }
    }
    if (!res.tuning.checks.empty()) {
        out << "# tuning\n";
        for (const auto& c : res.tuning.checks) {
            out << (c.holds ? "ok    " : "FAIL  ") << std::left << std::setw(36) << c.name << c.lhs << ' '
                << c.relation << ' ' << c.rhs << '\n';
        }
    }
    out << "# sampling times\n";
    auto time_line = [&](const char* k, const std::optional<double>& v, const std::string& err) {
        out << std::left << std::setw(18) << k;
        if (v) {
            out << *v << '\n';
        } else {
            out << "undefined (" << err << ")\n";
        }
    };
    time_line("T_practical", res.practical, res.practical_error);
    time_line("T_violation_free", res.violation_free, res.violation_free_error);

    if (!opt.constants_out.empty()) {
        write_file(opt.constants_out, [&](std::ostream& os) {
            const auto& b = res.bounds;
            os << std::setprecision(17);
            os << "b_f=" << b.b_f << "\nb_g=" << b.b_g << "\nb_k=" << b.b_k << "\nlambda=" << b.lambda
               << "\nmu=" << b.mu << "\nm_lip=" << b.m_lip << "\nl_k=" << b.l_k << "\nl_sigma=" << b.l_sigma
               << "\nsafety_factor=" << b.safety_factor << '\n';
            if (res.practical) os << "practical_sampling_time=" << *res.practical << '\n';
            if (res.violation_free) os << "violation_free_sampling_time=" << *res.violation_free << '\n';
            if (res.assumptions) os << "assumptions_hold=" << (res.assumptions->all_hold() ? 1 : 0) << '\n';
            if (!res.tuning.checks.empty()) os << "tuning_valid=" << (res.tuning.ok() ? 1 : 0) << '\n';
        });
    }
    if (res.assumptions && !res.assumptions->all_hold()) {
        out << "assumption failed: " << res.assumptions->first_failure()->name << '\n';
        return exit_assumption;
    }
    return exit_safe;
}

inline int compare(const Options& opt, std::ostream& out) {
    const RunConfig cfg = load_config(opt.config, opt.overrides);
    if (cfg.scenario.controller != ControllerKind::tunable) {
        throw ConfigError("compare: scenario.controller must be 'tunable'");
    }
    const ConstantsResult res = compute_constants(cfg);
    if (res.assumptions && !res.assumptions->all_hold()) {
        out << "assumption failed: " << res.assumptions->first_failure()->name << '\n';
        return exit_assumption;
    }
    if (!res.violation_free) throw ConfigError("compare: " + res.violation_free_error);
    const double t_star = *res.violation_free;

    // the substep divides T_s* and is no coarser than the configured one
    const double q = std::max(1.0, std::ceil(t_star / cfg.scenario.integrator.substep - 1e-9));
    const double substep = t_star / q;
    const double steps = std::ceil(cfg.scenario.integrator.horizon / substep - 1e-9);
    if (steps > static_cast<double>(opt.max_compare_steps)) {
        std::ostringstream os;
        os << std::setprecision(6) << "compare: horizon " << cfg.scenario.integrator.horizon << " s needs " << steps
           << " substeps at T_s* = " << t_star << " s (limit " << opt.max_compare_steps << "); reduce sim.horizon";
        throw ConfigError(os.str());
    }

    acc::AccScenario periodic = cfg.scenario;
    periodic.integrator.substep = substep;
    periodic.integrator.horizon = steps * substep;
    periodic.schedule = HoldSchedule::periodic(t_star);
    acc::AccScenario event = periodic;
    event.schedule = HoldSchedule::event_triggered(cfg.scenario.schedule.mode == HoldSchedule::Mode::event_triggered
                                                       ? cfg.scenario.schedule.event_floor
                                                       : 0.0);

    auto fut_p = std::async(std::launch::async, [&] { return run(periodic.build()); });
    const Trace tr_e = run(event.build());
    const Trace tr_p = fut_p.get();
    const AnalysisReport rp = analyze(tr_p, violation_tol);
    const AnalysisReport re = analyze(tr_e, violation_tol);

    if (!cfg.output.trace.empty()) {
        write_file(with_suffix(cfg.output.trace, "periodic"), [&](std::ostream& os) { write_trace_csv(os, tr_p); });
        write_file(with_suffix(cfg.output.trace, "event"), [&](std::ostream& os) { write_trace_csv(os, tr_e); });
    }
    if (!opt.plot_script.empty()) {
        if (cfg.output.trace.empty()) throw ConfigError("--plot-script needs output.trace to be set");
        write_plot_script(opt.plot_script,
                          {with_suffix(cfg.output.trace, "periodic"), with_suffix(cfg.output.trace, "event")});
    }

    auto opt_str = [](const std::optional<double>& v) {
        std::ostringstream os;
        os << std::setprecision(17);
        if (v) {
            os << *v;
        } else {
            os << "none";
        }
        return os.str();
    };
    out << std::setprecision(17);
    out << "T_s* " << t_star << "\nsubstep " << substep << "\nhorizon " << periodic.integrator.horizon << '\n';
    out << std::left << std::setw(12) << "" << std::setw(26) << "periodic" << "event\n";
    out << std::setw(12) << "events" << std::setw(26) << rp.num_events << re.num_events << '\n';
    out << std::setw(12) << "miet" << std::setw(26) << opt_str(rp.min_gap) << opt_str(re.min_gap) << '\n';
    out << std::setw(12) << "min_h" << std::setw(26) << rp.min_h << re.min_h << '\n';
    out << std::setw(12) << "violation" << std::setw(26) << opt_str(rp.violation_time) << opt_str(re.violation_time)
        << '\n';

    const bool safe = is_safe(rp) && is_safe(re);
    const bool fewer = re.num_events <= rp.num_events;
    out << "violation_free " << (safe ? "yes" : "no") << '\n';
    out << "event_count_le_periodic " << (fewer ? "yes" : "no") << '\n';
    return safe && fewer ? exit_safe : exit_violation;
}

/// Runs a subcommand, mapping library errors to exit code 1 with a diagnostic.
template <class F>
int guarded(F&& body, std::ostream& err) {
    try {
        return body();
    } catch (const InfeasibleError& e) {
        err << "error: infeasible CBF-QP: " << e.what() << '\n';
    } catch (const DivergenceError& e) {
        err << "error: divergence at t=" << e.time << " state " << format_vector(e.state) << ": " << e.what() << '\n';
    } catch (const RegionExitError& e) {
        err << "error: region exit at t=" << e.time << " state " << format_vector(e.state) << '\n';
    } catch (const SamplingError& e) {
        err << "error: bound estimation: " << e.what() << '\n';
    } catch (const ConfigError& e) {
        err << "error: config: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return exit_error;
}

}  // namespace shcbf::cli
