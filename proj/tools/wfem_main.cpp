// Batch front-end for the channel, focus and manufactured-solution studies.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 degeneracy.

#include "wfem/experiments.hpp"
#include "wfem/mesh.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitDegenerate = 4;

struct StudyOptions {
    std::string preset = "full";
    std::string config_file;
    std::string levels;
    std::optional<int> ref_level;
    std::string out;
    std::optional<std::size_t> tsteps;
    std::optional<double> final_time;
    std::vector<std::string> sets;
};

void add_study_options(CLI::App* cmd, StudyOptions& opts) {
    cmd->add_option("--preset", opts.preset, "Parameter preset")->check(CLI::IsMember({"full", "desk"}));
    cmd->add_option("--config", opts.config_file, "key=value configuration file");
    cmd->add_option("--levels", opts.levels, "Levels, e.g. 1-4 or 1,2,3");
    cmd->add_option("--ref-level", opts.ref_level, "Reference level (channel)");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--tsteps", opts.tsteps, "Number of time steps");
    cmd->add_option("--final-time", opts.final_time, "Final time in seconds");
    cmd->add_option("--set", opts.sets, "Extra key=value override (repeatable)");
}

wfem::ExperimentConfig build_config(wfem::StudyKind kind, const StudyOptions& opts) {
    wfem::ExperimentConfig config = wfem::ExperimentConfig::preset(kind, opts.preset);
    config.out_dir = std::string("out/") + std::string(wfem::to_string(kind));
    if (!opts.config_file.empty()) {
        config.load_file(opts.config_file);
    }
    for (const std::string& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw wfem::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.levels.empty()) {
        config.levels = wfem::parse_levels(opts.levels);
    }
    if (opts.ref_level) {
        config.ref_level = *opts.ref_level;
    }
    if (!opts.out.empty()) {
        config.out_dir = opts.out;
    }
    if (opts.tsteps) {
        config.time.n_points = *opts.tsteps + 1;
    }
    if (opts.final_time) {
        config.time.final_time = *opts.final_time;
    }
    config.validate();
    return config;
}

void print_table(const wfem::OrderTable& table) {
    std::cout << std::setw(6) << "level" << std::setw(14) << "LinfL2(u)" << std::setw(8) << "ord" << std::setw(14)
              << "LinfH1(u)" << std::setw(8) << "ord" << std::setw(14) << "LinfL2(v)" << std::setw(8) << "ord"
              << std::setw(14) << "LinfH1(v)" << std::setw(8) << "ord" << std::setw(14) << "L2L2(a)" << std::setw(8)
              << "ord" << '\n';
    for (std::size_t row = 0; row < table.errors.size(); ++row) {
        std::cout << std::setw(6) << table.levels[row];
        const auto e = table.errors[row].as_array();
        for (std::size_t col = 0; col < e.size(); ++col) {
            std::cout << std::setw(14) << std::setprecision(5) << std::scientific << e[col];
            const double ord = table.order_at(row, col);
            std::cout << std::setw(8) << std::setprecision(4) << std::fixed;
            if (std::isnan(ord)) {
                std::cout << "-";
            } else {
                std::cout << ord;
            }
        }
        std::cout << '\n';
    }
    std::cout.unsetf(std::ios::floatfield);
}

bool margins_positive(const std::vector<wfem::LevelSummary>& summaries) {
    for (const auto& s : summaries) {
        if (!(s.min_margin > 0.0)) {
            return false;
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite element solvers for Westervelt's equation and its linearization"};
    app.require_subcommand(1);

    StudyOptions channel_opts, focus_opts, mms_opts;
    auto* channel = app.add_subcommand("channel", "1D channel convergence study against a fine reference");
    add_study_options(channel, channel_opts);
    auto* focus = app.add_subcommand("focus", "2D focused-ultrasound study of q(u_h) = max_t |u_h|_L2");
    add_study_options(focus, focus_opts);
    auto* mms = app.add_subcommand("mms", "Linear manufactured-solution convergence study");
    add_study_options(mms, mms_opts);
    bool mms_constant = false;
    mms->add_flag("--constant-coefficients", mms_constant, "Use alpha = 1, beta = 0");

    std::string mesh_kind = "channel";
    int mesh_level = 1;
    std::string mesh_out;
    auto* dump = app.add_subcommand("dump-mesh", "Write a mesh in plain-text form");
    dump->add_option("kind", mesh_kind, "channel or focus")->check(CLI::IsMember({"channel", "focus"}));
    dump->add_option("--level", mesh_level, "Mesh level");
    dump->add_option("-o,--output", mesh_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*dump) {
            const wfem::Mesh mesh = mesh_kind == "channel" ? wfem::channel_mesh(mesh_level) : wfem::focus_mesh(mesh_level);
            if (mesh_out.empty()) {
                wfem::write_mesh(std::cout, mesh);
            } else {
                std::ofstream out(mesh_out);
                if (!out) {
                    std::cerr << "cannot open " << mesh_out << '\n';
                    return kExitConfig;
                }
                wfem::write_mesh(out, mesh);
            }
            return 0;
        }
        if (*channel) {
            const auto config = build_config(wfem::StudyKind::Channel, channel_opts);
            const auto study = wfem::cmd_channel(config);
            print_table(study.table);
            std::cout << "results written to " << config.out_dir.string() << '\n';
            return margins_positive(study.summaries) ? 0 : kExitDegenerate;
        }
        if (*focus) {
            const auto config = build_config(wfem::StudyKind::Focus, focus_opts);
            const auto study = wfem::cmd_focus(config);
            std::cout << std::setprecision(12);
            for (std::size_t i = 0; i < study.q.size(); ++i) {
                std::cout << "level " << study.levels[i] << "  h = " << study.h[i] << "  q = " << study.q[i] << '\n';
            }
            if (study.fit) {
                std::cout << "fit alpha + beta h^gamma: alpha = " << study.fit->alpha << ", beta = " << study.fit->beta
                          << ", gamma = " << study.fit->gamma << '\n';
            }
            std::cout << "results written to " << config.out_dir.string() << '\n';
            return margins_positive(study.summaries) ? 0 : kExitDegenerate;
        }
        if (*mms) {
            auto config = build_config(wfem::StudyKind::Mms, mms_opts);
            if (mms_constant) {
                config.mms.variable_coefficients = false;
            }
            const auto study = wfem::cmd_mms(config);
            print_table(study.table);
            std::cout << "results written to " << config.out_dir.string() << '\n';
            return 0;
        }
    } catch (const wfem::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const wfem::StepFailure& e) {
        std::cerr << "run failed at " << e.what() << '\n';
        return e.cause() == wfem::StepFailure::Cause::Degenerate ? kExitDegenerate : kExitSolver;
    } catch (const wfem::DegenerateState& e) {
        std::cerr << "degenerate state: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const wfem::InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const wfem::Error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    }
    return 0;
}
