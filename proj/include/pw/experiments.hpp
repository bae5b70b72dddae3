#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pw/dataset.hpp"
#include "pw/model.hpp"

namespace pw {

// ---- statistics -----------------------------------------------------------

// Two-sided 95% Student-t critical value (quantile at 0.975) for df >= 1.
double t_quantile_975(int df);

struct Summary {
    std::string key;
    int n = 0;
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool ci_valid = false;  // false for single-sample groups
};

// Group values by key; mean plus 95% t-interval per group (ordered by key).
std::vector<Summary> summarize(const std::vector<std::pair<std::string, double>>& keyed_values);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---- study protocols ------------------------------------------------------

struct ScalingStudySpec {
    std::vector<std::string> embodiments;                      // N names
    std::map<std::string, std::vector<Trajectory>> train_data; // per embodiment
    std::map<std::string, std::vector<Transition>> eval_data;  // held-out per embodiment
    std::vector<int> subset_sizes;                             // x values in [1, N-1]
    ModelConfig model;
    TrainSettings train;
    int batch_size = 8;
    std::vector<std::uint64_t> seeds{1};
    int threads = 1;
};

struct ScalingRow {
    std::string target;
    int x = 0;            // training subset size; N means the all-plus-target reference
    std::string subset;   // "+"-joined embodiment names, or "all+target"
    std::uint64_t seed = 0;
    double mse = 0.0;
};

// For every (seed, target, x, subset of the remaining embodiments) trains one
// model on the union and evaluates one-step MSE on the held-out target, plus
// one all-including-target reference run per (seed, target).
std::vector<ScalingRow> run_scaling_study(const ScalingStudySpec& spec);

struct CoTrainSpec {
    std::vector<std::pair<double, double>> ratios;  // (sim_weight, real_weight)
    const std::vector<Trajectory>* sim_data = nullptr;
    const std::vector<Trajectory>* real_data = nullptr;  // fixed real-proxy set
    std::vector<Transition> eval_real;                   // held-out real-proxy transitions
    ModelConfig model;
    TrainSettings train;
    int batch_size = 8;
    std::vector<std::uint64_t> seeds{1};
    int threads = 1;
};

struct CoTrainRow {
    double sim_weight = 0.0;
    double real_weight = 0.0;
    std::uint64_t seed = 0;
    double mse = 0.0;
};

// Trains one model per mixing ratio with equal transition budgets and
// evaluates all of them on the same held-out real-proxy transitions.
std::vector<CoTrainRow> run_cotrain_study(const CoTrainSpec& spec);

// ---- result files ----------------------------------------------------------

std::string scaling_rows_to_csv(const std::vector<ScalingRow>& rows,
                                const std::string& config_hash);
std::string cotrain_rows_to_csv(const std::vector<CoTrainRow>& rows,
                                const std::string& config_hash);
std::string summaries_to_csv(const std::vector<Summary>& summaries, const std::string& key_header,
                             const std::string& config_hash);

// Minimal polyline chart.
struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};
std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series,
                                  const std::string& config_hash);

}  // namespace pw
