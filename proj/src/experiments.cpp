#include "pw/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "pw/error.hpp"
#include "pw/rng.hpp"

namespace pw {

namespace {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student-t with df degrees of freedom, t >= 0.
double t_cdf(double t, int df) {
    const double x = df / (df + t * t);
    return 1.0 - 0.5 * incomplete_beta(df / 2.0, 0.5, x);
}

}  // namespace

double t_quantile_975(int df) {
    if (df < 1) throw ParameterError("t_quantile_975: df must be >= 1");
    double lo = 0.0, hi = 700.0;  // covers df = 1 (12.71)
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < 0.975)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<Summary> summarize(const std::vector<std::pair<std::string, double>>& keyed_values) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& [key, value] : keyed_values) groups[key].push_back(value);
    std::vector<Summary> out;
    for (const auto& [key, values] : groups) {
        Summary s;
        s.key = key;
        s.n = static_cast<int>(values.size());
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
        if (s.n >= 2) {
            double ss = 0.0;
            for (double v : values) ss += (v - s.mean) * (v - s.mean);
            const double sem = std::sqrt(ss / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
            const double half = t_quantile_975(s.n - 1) * sem;
            s.ci_lo = s.mean - half;
            s.ci_hi = s.mean + half;
            s.ci_valid = true;
        } else {
            s.ci_lo = s.ci_hi = s.mean;
            s.ci_valid = false;  // single-sample group: CI omitted
        }
        out.push_back(s);
    }
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (v[a] != v[b]) return v[a] < v[b];
        return a < b;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ParameterError("spearman: need two equal-length series with >= 2 entries");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0)
        throw ParameterError("spearman: a series is constant");
    return cov / std::sqrt(va * vb);
}

namespace {

// All size-x index subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> combinations(int n, int x) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(x);
    std::iota(cur.begin(), cur.end(), 0);
    while (true) {
        out.push_back(cur);
        int i = x - 1;
        while (i >= 0 && cur[i] == n - x + i) --i;
        if (i < 0) break;
        ++cur[i];
        for (int j = i + 1; j < x; ++j) cur[j] = cur[j - 1] + 1;
    }
    return out;
}

double train_and_eval(const ModelConfig& model_config, const TrainSettings& base_train,
                      int batch_size, std::uint64_t run_seed,
                      const std::vector<const std::vector<Trajectory>*>& sources,
                      const std::vector<Transition>& eval_set) {
    std::vector<std::pair<const std::vector<Trajectory>*, double>> weighted;
    for (const std::vector<Trajectory>* src : sources) {
        // Weight by transition count so the union is sampled uniformly.
        double transitions = 0.0;
        for (const Trajectory& t : *src) transitions += static_cast<double>(t.frames.size() - 1);
        weighted.push_back({src, transitions});
    }
    MixtureStream stream(weighted, batch_size, derive_seed(run_seed, "study-stream"));
    TrainSettings train = base_train;
    train.seed = run_seed;
    const TrainResult trained = train_model(model_config, stream, train, nullptr);
    return eval_one_step_mse(trained.params, model_config, eval_set);
}

// Runs tasks[i]() for i in [0, n) across `threads` workers; results land in
// caller-indexed slots so the outcome is independent of scheduling.
void parallel_run(const std::vector<std::function<void()>>& tasks, int threads) {
    if (threads <= 1 || tasks.size() <= 1) {
        for (const auto& task : tasks) task();
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            tasks[i]();
        }
    };
    std::vector<std::thread> pool;
    const int workers = std::min<std::size_t>(threads, tasks.size());
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<ScalingRow> run_scaling_study(const ScalingStudySpec& spec) {
    const int n = static_cast<int>(spec.embodiments.size());
    if (n < 2) throw ConfigError("scaling study: need at least 2 embodiments");
    for (const std::string& name : spec.embodiments) {
        if (!spec.train_data.count(name))
            throw ConfigError("scaling study: missing training dataset for '" + name + "'");
        if (!spec.eval_data.count(name))
            throw ConfigError("scaling study: missing eval dataset for '" + name + "'");
    }
    for (int x : spec.subset_sizes)
        if (x < 1 || x > n - 1)
            throw ConfigError("scaling study: subset size " + std::to_string(x) +
                              " outside [1, N-1]");

    // Enumerate every run up front so rows come out in a fixed order.
    struct RunSpec {
        std::uint64_t seed;
        std::string target;
        int x;
        std::string subset_label;
        std::vector<const std::vector<Trajectory>*> sources;
    };
    std::vector<RunSpec> runs;
    for (std::uint64_t seed : spec.seeds) {
        for (const std::string& target : spec.embodiments) {
            std::vector<std::string> others;
            for (const std::string& name : spec.embodiments)
                if (name != target) others.push_back(name);
            for (int x : spec.subset_sizes) {
                for (const std::vector<int>& combo : combinations(static_cast<int>(others.size()), x)) {
                    RunSpec run;
                    run.seed = seed;
                    run.target = target;
                    run.x = x;
                    for (std::size_t i = 0; i < combo.size(); ++i) {
                        if (i) run.subset_label += "+";
                        run.subset_label += others[combo[i]];
                        run.sources.push_back(&spec.train_data.at(others[combo[i]]));
                    }
                    runs.push_back(std::move(run));
                }
            }
            RunSpec reference;
            reference.seed = seed;
            reference.target = target;
            reference.x = n;
            reference.subset_label = "all+target";
            for (const std::string& name : spec.embodiments)
                reference.sources.push_back(&spec.train_data.at(name));
            runs.push_back(std::move(reference));
        }
    }

    std::vector<ScalingRow> rows(runs.size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        tasks.push_back([&, i]() {
            const RunSpec& run = runs[i];
            const std::uint64_t run_seed =
                derive_seed(run.seed, run.target + "|" + std::to_string(run.x) + "|" +
                                          run.subset_label);
            const double mse = train_and_eval(spec.model, spec.train, spec.batch_size, run_seed,
                                              run.sources, spec.eval_data.at(run.target));
            rows[i] = {run.target, run.x, run.subset_label, run.seed, mse};
        });
    }
    parallel_run(tasks, spec.threads);
    return rows;
}

std::vector<CoTrainRow> run_cotrain_study(const CoTrainSpec& spec) {
    if (!spec.sim_data || !spec.real_data) throw ConfigError("cotrain study: missing datasets");
    if (spec.eval_real.empty()) throw ConfigError("cotrain study: missing eval transitions");
    if (spec.ratios.empty()) throw ConfigError("cotrain study: no ratios");
    for (const auto& [sim_w, real_w] : spec.ratios)
        if (sim_w < 0.0 || real_w < 0.0 || (sim_w == 0.0 && real_w == 0.0))
            throw ConfigError("cotrain study: ratios must be non-negative and not all zero");

    struct RunSpec {
        std::uint64_t seed;
        double sim_w, real_w;
    };
    std::vector<RunSpec> runs;
    for (std::uint64_t seed : spec.seeds)
        for (const auto& [sim_w, real_w] : spec.ratios) runs.push_back({seed, sim_w, real_w});

    std::vector<CoTrainRow> rows(runs.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        tasks.push_back([&, i]() {
            const RunSpec& run = runs[i];
            std::vector<std::pair<const std::vector<Trajectory>*, double>> sources;
            if (run.sim_w > 0.0) sources.push_back({spec.sim_data, run.sim_w});
            if (run.real_w > 0.0) sources.push_back({spec.real_data, run.real_w});
            const std::uint64_t run_seed = derive_seed(
                run.seed, "cotrain|" + std::to_string(run.sim_w) + ":" + std::to_string(run.real_w));
            MixtureStream stream(sources, spec.batch_size, derive_seed(run_seed, "study-stream"));
            TrainSettings train = spec.train;
            train.seed = run_seed;
            const TrainResult trained = train_model(spec.model, stream, train, nullptr);
            rows[i] = {run.sim_w, run.real_w, run.seed,
                       eval_one_step_mse(trained.params, spec.model, spec.eval_real)};
        });
    }
    parallel_run(tasks, spec.threads);
    return rows;
}

namespace {

std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

std::string scaling_rows_to_csv(const std::vector<ScalingRow>& rows,
                                const std::string& config_hash) {
    std::string out = "# config_hash=" + config_hash + "\n";
    out += "target,x,subset,seed,mse\n";
    for (const ScalingRow& r : rows)
        out += r.target + "," + std::to_string(r.x) + "," + r.subset + "," +
               std::to_string(r.seed) + "," + format_double(r.mse) + "\n";
    return out;
}

std::string cotrain_rows_to_csv(const std::vector<CoTrainRow>& rows,
                                const std::string& config_hash) {
    std::string out = "# config_hash=" + config_hash + "\n";
    out += "sim_weight,real_weight,seed,mse\n";
    for (const CoTrainRow& r : rows)
        out += format_double(r.sim_weight) + "," + format_double(r.real_weight) + "," +
               std::to_string(r.seed) + "," + format_double(r.mse) + "\n";
    return out;
}

std::string summaries_to_csv(const std::vector<Summary>& summaries, const std::string& key_header,
                             const std::string& config_hash) {
    std::string out = "# config_hash=" + config_hash + "\n";
    out += key_header + ",n,mean,ci_lo,ci_hi,ci_valid\n";
    for (const Summary& s : summaries)
        out += s.key + "," + std::to_string(s.n) + "," + format_double(s.mean) + "," +
               format_double(s.ci_lo) + "," + format_double(s.ci_hi) + "," +
               (s.ci_valid ? "1" : "0") + "\n";
    return out;
}

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series,
                                  const std::string& config_hash) {
    const int width = 640, height = 420, margin = 60;
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    bool first = true;
    for (const SvgSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                min_x = max_x = s.x[i];
                min_y = max_y = s.y[i];
                first = false;
            }
            min_x = std::min(min_x, s.x[i]);
            max_x = std::max(max_x, s.x[i]);
            min_y = std::min(min_y, s.y[i]);
            max_y = std::max(max_y, s.y[i]);
        }
    }
    if (max_x == min_x) max_x = min_x + 1.0;
    if (max_y == min_y) max_y = min_y + 1.0;
    auto sx = [&](double x) {
        return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
    };
    auto sy = [&](double y) {
        return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
    };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<!-- config_hash=" << config_hash << " -->\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
        << "' y2='" << height - margin << "' stroke='black'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << height - margin << "' stroke='black'/>\n";
    svg << "<text x='" << width / 2 << "' y='" << height - 16
        << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    svg << "<text x='18' y='" << height / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 18 "
        << height / 2 << ")'>" << y_label << "</text>\n";
    svg << "<text x='" << margin << "' y='" << height - margin + 16 << "' font-size='10'>"
        << format_double(min_x) << "</text>\n";
    svg << "<text x='" << width - margin << "' y='" << height - margin + 16
        << "' text-anchor='end' font-size='10'>" << format_double(max_x) << "</text>\n";
    svg << "<text x='" << margin - 4 << "' y='" << height - margin
        << "' text-anchor='end' font-size='10'>" << format_double(min_y) << "</text>\n";
    svg << "<text x='" << margin - 4 << "' y='" << margin << "' text-anchor='end' font-size='10'>"
        << format_double(max_y) << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const SvgSeries& s = series[si];
        const char* color = colors[si % 6];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        svg << "'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg << "<circle cx='" << sx(s.x[i]) << "' cy='" << sy(s.y[i]) << "' r='3' fill='"
                << color << "'/>\n";
        svg << "<text x='" << width - margin + 6 << "' y='" << margin + 16 * si
            << "' font-size='11' fill='" << color << "'>" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace pw
