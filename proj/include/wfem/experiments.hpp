#pragma once

#include "wfem/errors.hpp"
#include "wfem/wavesolver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wfem {

enum class StudyKind { Channel, Focus, Mms };

std::string_view to_string(StudyKind kind);

/// Malformed or inconsistent configuration.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Everything needed to run one study. Defaults reproduce the published
/// settings; `preset("desk")` shrinks them to laptop scale.
struct ExperimentConfig {
    StudyKind kind = StudyKind::Channel;
    std::vector<int> levels;
    int ref_level = 8;
    MaterialParams material{};
    TimeGrid time{};
    NewmarkParams newmark{};
    FixedPointConfig fixed_point{};
    SolverConfig solver{};
    ChannelData channel{};
    FocusData focus{};
    MmsData mms{};
    std::filesystem::path out_dir = "out";
    std::size_t snapshot_stride = 0;

    static ExperimentConfig defaults(StudyKind kind);
    /// "full" or "desk".
    static ExperimentConfig preset(StudyKind kind, std::string_view name);

    /// Sets one `key=value` entry; unknown keys and malformed values throw ConfigError.
    void set(std::string_view key, std::string_view value);
    /// Reads a flat `key = value` file; `#` starts a comment.
    void load(std::istream& in);
    void load_file(const std::filesystem::path& path);
    void validate() const;
    /// Effective configuration in the same `key=value` format.
    void write(std::ostream& out) const;

    Problem problem(int level) const;
};

/// Parses "1,2,3", "1-4" or a mix such as "1-3,5".
std::vector<int> parse_levels(std::string_view text);

struct LevelSummary {
    int level = 0;
    double h = 0.0;
    std::size_t n_dofs = 0;
    std::size_t max_fp_iters = 0;
    double max_abs_u = 0.0;
    double min_margin = 1.0;
};

struct ConvergenceStudy {
    OrderTable table;
    std::vector<LevelSummary> summaries;
    std::optional<LevelSummary> reference;
};

struct FocusStudy {
    std::vector<int> levels;
    std::vector<double> h;
    std::vector<double> q;
    std::vector<LevelSummary> summaries;
    std::optional<PowerFit> fit;
    /// |q(finest) - q(level)| for all but the finest level, and the orders between consecutive entries.
    std::vector<double> q_errors;
    std::vector<double> q_orders;
};

/// Per-level hooks for callers that want the raw trajectories written out.
using TrajectorySink = std::function<void(int level, const Trajectory& traj)>;

/// Runs the reference level, then every level against it on the shared time grid.
ConvergenceStudy channel_study(const ExperimentConfig& config, const TrajectorySink& sink = {});
/// Runs every level and records q(u_h) = max_t |u_h(t)|_{L2}.
FocusStudy focus_study(const ExperimentConfig& config, const TrajectorySink& sink = {});
/// Runs the manufactured solution and measures errors against the exact solution.
ConvergenceStudy mms_study(const ExperimentConfig& config, const TrajectorySink& sink = {});

/// Step summary CSV `step,t,fp_iters,max_abs_u,margin`.
void write_step_summary(std::ostream& out, const Trajectory& traj);
/// Snapshot CSV `t,node_index,x[,y],u,v,a`.
void write_snapshots(std::ostream& out, const Trajectory& traj);

/// Command entry points: run the study and write its CSV files into config.out_dir.
ConvergenceStudy cmd_channel(const ExperimentConfig& config);
FocusStudy cmd_focus(const ExperimentConfig& config);
ConvergenceStudy cmd_mms(const ExperimentConfig& config);

}  // namespace wfem
