#include "wfem/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace wfem {

std::string_view to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::Channel: return "channel";
        case StudyKind::Focus: return "focus";
        case StudyKind::Mms: return "mms";
    }
    return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ConfigError("invalid number for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    return value;
}

long long parse_integer(std::string_view key, std::string_view text) {
    text = trim(text);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("invalid integer for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    return value;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
    const long long v = parse_integer(key, text);
    if (v < 0) {
        throw ConfigError("'" + std::string(key) + "' must be non-negative");
    }
    return static_cast<std::size_t>(v);
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "0" || text == "false" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError("invalid boolean for '" + std::string(key) + "': '" + std::string(text) + "'");
}

std::vector<int> level_range(int first, int last) {
    std::vector<int> v;
    for (int n = first; n <= last; ++n) {
        v.push_back(n);
    }
    return v;
}

// Writes through a temporary file renamed into place.
template <typename Writer>
void write_file(const std::filesystem::path& path, Writer writer) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        writer(out);
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

LevelSummary summarize(int level, const Trajectory& traj) {
    LevelSummary s;
    s.level = level;
    s.h = mesh_size(traj.space->mesh());
    s.n_dofs = traj.space->n_dofs();
    s.max_fp_iters = traj.max_fp_iters();
    s.max_abs_u = traj.max_abs_u();
    s.min_margin = traj.min_margin();
    return s;
}

}  // namespace

std::vector<int> parse_levels(std::string_view text) {
    std::vector<int> levels;
    std::size_t pos = 0;
    text = trim(text);
    if (text.empty()) {
        throw ConfigError("empty level list");
    }
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = trim(text.substr(pos, comma - pos));
        const std::size_t dash = item.find('-', 1);
        if (dash == std::string_view::npos) {
            levels.push_back(static_cast<int>(parse_integer("levels", item)));
        } else {
            const int first = static_cast<int>(parse_integer("levels", item.substr(0, dash)));
            const int last = static_cast<int>(parse_integer("levels", item.substr(dash + 1)));
            if (last < first) {
                throw ConfigError("descending level range '" + std::string(item) + "'");
            }
            for (int n = first; n <= last; ++n) {
                levels.push_back(n);
            }
        }
        pos = comma + 1;
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

ExperimentConfig ExperimentConfig::defaults(StudyKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    switch (kind) {
        case StudyKind::Channel:
            c.levels = level_range(1, 6);
            c.ref_level = 8;
            c.time = {37e-6, 2001};
            break;
        case StudyKind::Focus:
            c.levels = level_range(1, 5);
            c.ref_level = 6;
            c.time = {40e-6, 3501};
            break;
        case StudyKind::Mms:
            // Unit-scale medium on [0, 1] m and [0, 1] s; the average-acceleration
            // Newmark scheme keeps the time error below the spatial error at level 7.
            c.levels = level_range(3, 7);
            c.ref_level = 8;
            c.time = {1.0, 2001};
            c.material = {1.0, 1.0, 0.1, 0.0};
            c.newmark = {0.25, 0.5};
            break;
    }
    return c;
}

ExperimentConfig ExperimentConfig::preset(StudyKind kind, std::string_view name) {
    ExperimentConfig c = defaults(kind);
    if (name == "full") {
        return c;
    }
    if (name != "desk") {
        throw ConfigError("unknown preset '" + std::string(name) + "' (expected full or desk)");
    }
    switch (kind) {
        case StudyKind::Channel:
            c.levels = level_range(1, 4);
            c.ref_level = 6;
            break;
        case StudyKind::Focus:
            c.levels = level_range(1, 4);
            c.ref_level = 5;
            break;
        case StudyKind::Mms:
            break;
    }
    return c;
}

void ExperimentConfig::set(std::string_view key_in, std::string_view value) {
    const std::string_view key = trim(key_in);
    if (key == "levels") {
        levels = parse_levels(value);
    } else if (key == "ref_level") {
        ref_level = static_cast<int>(parse_integer(key, value));
    } else if (key == "c") {
        material.c = parse_double(key, value);
    } else if (key == "rho") {
        material.rho = parse_double(key, value);
    } else if (key == "b") {
        material.b = parse_double(key, value);
    } else if (key == "beta_a") {
        material.beta_a = parse_double(key, value);
    } else if (key == "final_time") {
        time.final_time = parse_double(key, value);
    } else if (key == "time_points") {
        time.n_points = parse_count(key, value);
    } else if (key == "time_steps") {
        time.n_points = parse_count(key, value) + 1;
    } else if (key == "newmark_beta") {
        newmark.beta = parse_double(key, value);
    } else if (key == "newmark_gamma") {
        newmark.gamma = parse_double(key, value);
    } else if (key == "fp_tol") {
        fixed_point.tol = parse_double(key, value);
    } else if (key == "fp_max_iter") {
        fixed_point.max_iter = parse_count(key, value);
    } else if (key == "fp_floor") {
        fixed_point.floor = parse_double(key, value);
    } else if (key == "fp_explicit") {
        fixed_point.explicit_rhs = parse_bool(key, value);
    } else if (key == "pcg_tol") {
        solver.pcg.tol = parse_double(key, value);
    } else if (key == "ritz_tol") {
        solver.ritz_pcg.tol = parse_double(key, value);
    } else if (key == "pcg_max_iter") {
        solver.pcg.max_iter = parse_count(key, value);
    } else if (key == "margin_min") {
        solver.margin_min = parse_double(key, value);
    } else if (key == "A1") {
        channel.A1 = parse_double(key, value);
    } else if (key == "A2") {
        channel.A2 = parse_double(key, value);
    } else if (key == "sigma1") {
        channel.sigma1 = parse_double(key, value);
    } else if (key == "sigma2") {
        channel.sigma2 = parse_double(key, value);
    } else if (key == "mu") {
        channel.mu = parse_double(key, value);
    } else if (key == "g0") {
        focus.g0 = parse_double(key, value);
    } else if (key == "freq") {
        focus.frequency = parse_double(key, value);
    } else if (key == "mms_variable") {
        mms.variable_coefficients = parse_bool(key, value);
    } else if (key == "out") {
        out_dir = std::string(trim(value));
    } else if (key == "snapshot_stride") {
        snapshot_stride = parse_count(key, value);
    } else {
        throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }
}

void ExperimentConfig::load(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        }
        set(view.substr(0, eq), view.substr(eq + 1));
    }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    load(in);
}

void ExperimentConfig::validate() const {
    if (levels.empty()) {
        throw ConfigError("no levels selected");
    }
    if (levels.front() < 1) {
        throw ConfigError("levels must be >= 1");
    }
    if (kind == StudyKind::Channel && ref_level <= levels.back()) {
        throw ConfigError("ref_level must exceed every level");
    }
    try {
        material.validate();
        time.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (!(fixed_point.tol > 0.0) || fixed_point.max_iter == 0) {
        throw ConfigError("fixed-point tolerance and iteration limit must be positive");
    }
    if (!(solver.pcg.tol > 0.0) || !(solver.ritz_pcg.tol > 0.0)) {
        throw ConfigError("pcg_tol and ritz_tol must be positive");
    }
    if (!(channel.sigma1 > 0.0) || !(channel.sigma2 > 0.0)) {
        throw ConfigError("sigma1 and sigma2 must be positive");
    }
    if (!(focus.frequency > 0.0)) {
        throw ConfigError("freq must be positive");
    }
}

void ExperimentConfig::write(std::ostream& out) const {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "# study: " << to_string(kind) << '\n';
    out << "levels=";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        out << (i ? "," : "") << levels[i];
    }
    out << '\n';
    out << "ref_level=" << ref_level << '\n'
        << "c=" << material.c << '\n'
        << "rho=" << material.rho << '\n'
        << "b=" << material.b << '\n'
        << "beta_a=" << material.beta_a << '\n'
        << "final_time=" << time.final_time << '\n'
        << "time_points=" << time.n_points << '\n'
        << "newmark_beta=" << newmark.beta << '\n'
        << "newmark_gamma=" << newmark.gamma << '\n'
        << "fp_tol=" << fixed_point.tol << '\n'
        << "fp_max_iter=" << fixed_point.max_iter << '\n'
        << "fp_floor=" << fixed_point.floor << '\n'
        << "fp_explicit=" << (fixed_point.explicit_rhs ? "true" : "false") << '\n'
        << "pcg_tol=" << solver.pcg.tol << '\n'
        << "pcg_max_iter=" << solver.pcg.max_iter << '\n'
        << "ritz_tol=" << solver.ritz_pcg.tol << '\n'
        << "margin_min=" << solver.margin_min << '\n'
        << "A1=" << channel.A1 << '\n'
        << "A2=" << channel.A2 << '\n'
        << "sigma1=" << channel.sigma1 << '\n'
        << "sigma2=" << channel.sigma2 << '\n'
        << "mu=" << channel.mu << '\n'
        << "g0=" << focus.g0 << '\n'
        << "freq=" << focus.frequency << '\n'
        << "mms_variable=" << (mms.variable_coefficients ? "true" : "false") << '\n'
        << "snapshot_stride=" << snapshot_stride << '\n';
    out.precision(precision);
}

Problem ExperimentConfig::problem(int level) const {
    Problem p;
    switch (kind) {
        case StudyKind::Channel: p.kind = ProblemKind::Channel; break;
        case StudyKind::Focus: p.kind = ProblemKind::Focus; break;
        case StudyKind::Mms: p.kind = ProblemKind::LinearMms; break;
    }
    p.level = level;
    p.material = material;
    p.time = time;
    p.newmark = newmark;
    p.fixed_point = fixed_point;
    p.solver = solver;
    p.channel = channel;
    p.focus = focus;
    p.mms = mms;
    p.snapshot_stride = snapshot_stride;
    return p;
}

ConvergenceStudy channel_study(const ExperimentConfig& config, const TrajectorySink& sink) {
    config.validate();
    ConvergenceStudy study;
    Problem ref_problem = config.problem(config.ref_level);
    ref_problem.snapshot_stride = 1;
    const Trajectory reference = run(ref_problem);
    study.reference = summarize(config.ref_level, reference);
    if (sink) {
        sink(config.ref_level, reference);
    }
    for (int level : config.levels) {
        const Problem problem = config.problem(level);
        auto space = std::make_shared<const FeSpace>(make_mesh(problem));
        ErrorAccumulator acc(reference.space, space);
        const Trajectory traj = run(problem, space, [&](std::size_t step, const WaveState& state) {
            acc.add(state.t, state, reference.snapshots.at(step));
        });
        study.table.levels.push_back(level);
        study.table.errors.push_back(acc.report());
        study.summaries.push_back(summarize(level, traj));
        if (sink) {
            sink(level, traj);
        }
    }
    return study;
}

FocusStudy focus_study(const ExperimentConfig& config, const TrajectorySink& sink) {
    config.validate();
    FocusStudy study;
    for (int level : config.levels) {
        const Problem problem = config.problem(level);
        auto space = std::make_shared<const FeSpace>(make_mesh(problem));
        const NormEvaluator norms(*space);
        double q = 0.0;
        const Trajectory traj =
            run(problem, space, [&](std::size_t, const WaveState& state) { q = std::max(q, norms.l2(state.u)); });
        study.levels.push_back(level);
        study.h.push_back(mesh_size(space->mesh()));
        study.q.push_back(q);
        study.summaries.push_back(summarize(level, traj));
        if (sink) {
            sink(level, traj);
        }
    }
    if (study.q.size() >= 3) {
        study.fit = fit_power(study.h, study.q);
    }
    const double q_finest = study.q.back();
    for (std::size_t i = 0; i + 1 < study.q.size(); ++i) {
        study.q_errors.push_back(std::abs(q_finest - study.q[i]));
    }
    for (std::size_t i = 1; i < study.q_errors.size(); ++i) {
        const double prev = study.q_errors[i - 1], next = study.q_errors[i];
        study.q_orders.push_back(prev > 0.0 && next > 0.0 ? order(prev, next)
                                                          : std::numeric_limits<double>::quiet_NaN());
    }
    return study;
}

ConvergenceStudy mms_study(const ExperimentConfig& config, const TrajectorySink& sink) {
    config.validate();
    ConvergenceStudy study;
    const MmsData mms = config.mms;
    ExactSolution exact;
    exact.u = [mms](const Point& p, double t) { return mms.u(p[0], t); };
    exact.u_t = [mms](const Point& p, double t) { return mms.u_t(p[0], t); };
    exact.u_tt = [mms](const Point& p, double t) { return mms.u_tt(p[0], t); };
    exact.grad_u = [mms](const Point& p, double t) { return Point{mms.u_x(p[0], t), 0.0}; };
    exact.grad_u_t = [mms](const Point& p, double t) { return Point{mms.u_xt(p[0], t), 0.0}; };
    for (int level : config.levels) {
        const Problem problem = config.problem(level);
        auto space = std::make_shared<const FeSpace>(make_mesh(problem));
        ExactErrorAccumulator acc(space, exact);
        const Trajectory traj = run(problem, space, [&](std::size_t, const WaveState& state) { acc.add(state); });
        study.table.levels.push_back(level);
        study.table.errors.push_back(acc.report());
        study.summaries.push_back(summarize(level, traj));
        if (sink) {
            sink(level, traj);
        }
    }
    return study;
}

void write_step_summary(std::ostream& out, const Trajectory& traj) {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "step,t,fp_iters,max_abs_u,margin\n";
    for (const StepRecord& r : traj.records) {
        out << r.step << ',' << r.t << ',' << r.fp_iters << ',' << r.max_abs_u << ',' << r.margin << '\n';
    }
    out.precision(precision);
}

void write_snapshots(std::ostream& out, const Trajectory& traj) {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    const Mesh& mesh = traj.space->mesh();
    const bool two_d = mesh.dim() == 2;
    out << (two_d ? "t,node_index,x,y,u,v,a\n" : "t,node_index,x,u,v,a\n");
    for (const WaveState& s : traj.snapshots) {
        for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
            out << s.t << ',' << i << ',' << mesh.node(i)[0];
            if (two_d) {
                out << ',' << mesh.node(i)[1];
            }
            out << ',' << s.u[i] << ',' << s.v[i] << ',' << s.a[i] << '\n';
        }
    }
    out.precision(precision);
}

namespace {

TrajectorySink file_sink(const ExperimentConfig& config, int ref_level = -1) {
    return [&config, ref_level](int level, const Trajectory& traj) {
        const std::string stem = level == ref_level ? "ref_level" + std::to_string(level) : "level" + std::to_string(level);
        write_file(config.out_dir / ("summary_" + stem + ".csv"), [&](std::ostream& out) { write_step_summary(out, traj); });
        if (config.snapshot_stride > 0) {
            Trajectory strided;
            strided.space = traj.space;
            for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
                const std::size_t step = traj.snapshot_steps[k];
                if (step % config.snapshot_stride == 0 || k + 1 == traj.snapshots.size()) {
                    strided.snapshots.push_back(traj.snapshots[k]);
                }
            }
            write_file(config.out_dir / ("snapshots_" + stem + ".csv"),
                       [&](std::ostream& out) { write_snapshots(out, strided); });
        }
    };
}

void prepare_output(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);
    write_file(config.out_dir / "config.txt", [&](std::ostream& out) { config.write(out); });
}

}  // namespace

ConvergenceStudy cmd_channel(const ExperimentConfig& config) {
    prepare_output(config);
    ConvergenceStudy study = channel_study(config, file_sink(config, config.ref_level));
    write_file(config.out_dir / "order_table.csv", [&](std::ostream& out) { write_order_table(out, study.table); });
    return study;
}

FocusStudy cmd_focus(const ExperimentConfig& config) {
    prepare_output(config);
    FocusStudy study = focus_study(config, file_sink(config));
    write_file(config.out_dir / "q_vs_h.csv", [&](std::ostream& out) {
        out.precision(std::numeric_limits<double>::max_digits10);
        out << "level,h,q\n";
        for (std::size_t i = 0; i < study.q.size(); ++i) {
            out << study.levels[i] << ',' << study.h[i] << ',' << study.q[i] << '\n';
        }
    });
    write_file(config.out_dir / "q_orders.csv", [&](std::ostream& out) {
        out.precision(std::numeric_limits<double>::max_digits10);
        out << "level,e_q,ord\n";
        for (std::size_t i = 0; i < study.q_errors.size(); ++i) {
            out << study.levels[i] << ',' << study.q_errors[i] << ',';
            if (i == 0 || std::isnan(study.q_orders[i - 1])) {
                out << "NaN";
            } else {
                out << study.q_orders[i - 1];
            }
            out << '\n';
        }
    });
    if (study.fit) {
        write_file(config.out_dir / "fit.csv", [&](std::ostream& out) { write_fit_report(out, *study.fit); });
    }
    return study;
}

ConvergenceStudy cmd_mms(const ExperimentConfig& config) {
    prepare_output(config);
    ConvergenceStudy study = mms_study(config, file_sink(config));
    write_file(config.out_dir / "order_table.csv", [&](std::ostream& out) { write_order_table(out, study.table); });
    return study;
}

}  // namespace wfem
