// subgram: batch CLI over the in-context n-gram laboratory. Subcommands
// generate data, evaluate estimator baselines, check gradients, verify the
// explicit constructions, probe near-stationarity, train, sweep seeds, and
// re-render figures from CSVs.
//
// Options can also come from a JSON file via --config (explicit flags win).
// SUBGRAM_THREADS caps data-parallel width (default: hardware count).
// Exit codes: 0 success, 1 internal/assert failure, 2 invalid input.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "subgram/constructions.hpp"
#include "subgram/estimators.hpp"
#include "subgram/grad.hpp"
#include "subgram/seqmodel.hpp"
#include "subgram/serialize.hpp"
#include "subgram/svg.hpp"
#include "subgram/training.hpp"
#include "subgram/transformer.hpp"

namespace fs = std::filesystem;
using namespace subgram;

namespace {

constexpr const char* kVersion = "subgram 1.0";

std::string version_hash() {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(subgram::detail::fnv1a64(kVersion)));
    return buf;
}

// Fills option values from a JSON config file for flags not given on the
// command line.
struct JsonDefaults {
    std::vector<std::function<void(const json&)>> appliers;

    template <typename T>
    void bind(CLI::Option* opt, T& var, const std::string& key) {
        appliers.push_back([opt, &var, key](const json& j) {
            if (opt->count() == 0 && j.contains(key)) var = j.at(key).get<T>();
        });
    }
    void apply(const std::string& path) {
        if (path.empty()) return;
        const json j = read_json_file(path);
        for (auto& f : appliers) f(j);
    }
};

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::invalid_argument("cannot create directory: " + dir);
}

// -------- gen --------

int cmd_gen(int S, int n, double alpha, std::size_t T, std::size_t batch, std::size_t num_lms,
            uint64_t seed, const std::string& out_dir) {
    const NGramSpec spec(S, n, alpha, seed);
    ensure_dir(out_dir);
    json lms = json::array();
    std::vector<TransitionTensor> tensors;
    std::vector<StationaryDistribution> pis;
    for (std::size_t l = 0; l < num_lms; ++l) {
        Rng rng = Rng::substream(seed, "gen-lm", l);
        tensors.push_back(sample_lm(spec, rng));
        pis.push_back(stationary(tensors.back()));
        lms.push_back(tensor_to_json(tensors.back()));
    }
    SequenceBatch out;
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t l = b % num_lms;
        Rng rng = Rng::substream(seed, "gen-seq", b);
        out.sequences.push_back(sample_sequence(tensors[l], pis[l], T, rng));
        out.lm_index.push_back(l);
    }
    write_json_file(out_dir + "/lm.json", lms);
    write_sequences_csv(out_dir + "/sequences.csv", out);
    std::printf("wrote %zu language model(s) and %zu sequences to %s\n", num_lms, batch,
                out_dir.c_str());
    return 0;
}

// -------- baselines --------

int cmd_baselines(int S, int n, double alpha, std::size_t T, std::size_t test_size, int kmax,
                  uint64_t seed, const std::string& lags_arg, const std::string& out_path) {
    const NGramSpec spec(S, n, alpha, seed);
    std::vector<TransitionTensor> tensors;
    std::vector<StationaryDistribution> pis;
    SequenceBatch batch;
    for (std::size_t b = 0; b < test_size; ++b) {
        Rng rng = Rng::substream(seed, "baseline-lm", b);
        tensors.push_back(sample_lm(spec, rng));
        pis.push_back(stationary(tensors.back()));
        Rng srng = Rng::substream(seed, "baseline-seq", b);
        batch.sequences.push_back(sample_sequence(tensors.back(), pis.back(), T, srng));
        batch.lm_index.push_back(b);
    }

    CsvWriter csv(out_path);
    csv.header({"kind", "k_or_lags", "T", "mean_ce", "stderr", "n_sequences"});
    auto emit = [&](const std::string& kind, const std::string& which, double mean, double se) {
        csv.line({kind, which, std::to_string(T), fmt_double(mean), fmt_double(se),
                  std::to_string(test_size)});
        std::printf("%-16s %-8s mean_ce %.6f  stderr %.6f\n", kind.c_str(), which.c_str(), mean,
                    se);
    };
    for (int k = 1; k <= kmax; ++k) {
        const auto res = estimator_ce(EstimatorKind::make_kgram(k), batch, tensors, pis);
        emit("kgram", std::to_string(k), res.mean_ce, res.stderr_ce);
        // posterior-mean variant (the level soft models can actually reach)
        double acc = 0.0, acc_sq = 0.0;
        for (std::size_t b = 0; b < test_size; ++b) {
            std::vector<int> hist(batch.sequences[b].end() - (n - 1), batch.sequences[b].end());
            const double ce = ce_loss_vs_truth(
                kgram_predict_smoothed(batch.sequences[b], S, k, alpha),
                conditional(tensors[b], pis[b], hist));
            acc += ce;
            acc_sq += ce * ce;
        }
        const double mean = acc / static_cast<double>(test_size);
        const double var = std::max(0.0, acc_sq / test_size - mean * mean);
        emit("kgram_smoothed", std::to_string(k), mean,
             test_size > 1 ? std::sqrt(var / (test_size - 1.0)) : 0.0);
    }
    if (!lags_arg.empty()) {
        std::vector<int> lags;
        for (auto v : parse_size_list(lags_arg)) lags.push_back(static_cast<int>(v));
        const auto res = estimator_ce(EstimatorKind::make_subset(lags), batch, tensors, pis);
        emit("subset", "{" + lags_arg + "}", res.mean_ce, res.stderr_ce);
    }
    return 0;
}

// -------- gradcheck --------

int cmd_gradcheck(int S, int m, std::size_t T, uint64_t seed, double step, double threshold,
                  const std::string& out_path) {
    const ModelConfig cfg(S, m, static_cast<int>(T));
    ModelParams params = ModelParams::zeros(cfg);
    Rng rng(seed);
    for (auto& mat : params.A1)
        for (auto& v : mat.data()) v = rng.gaussian(0.0, 0.4);
    for (auto& mat : params.V1)
        for (auto& v : mat.data()) v = rng.gaussian(0.0, 0.4);
    for (auto& v : params.K2.data()) v = rng.gaussian(0.0, 0.4);
    for (auto& v : params.Q2.data()) v = rng.gaussian(0.0, 0.4);
    Sequence seq(T);
    for (auto& t : seq) t = static_cast<int>(rng.below(S));
    const Vector truth = rng.dirichlet(S, 1.0);

    Rng sub_rng = Rng::substream(seed, "gradcheck-subsample", 0);
    const FdReport rep = fd_check(params, Embedding::one_hot(S), seq, truth, step, 8192, &sub_rng);
    const json out{{"max_rel_err", rep.max_rel_err},
                   {"worst_param_coordinate", rep.worst_param_coordinate},
                   {"worst_analytic", rep.worst_analytic},
                   {"worst_fd", rep.worst_fd},
                   {"step", rep.step},
                   {"n_checked", rep.n_checked},
                   {"threshold", threshold},
                   {"S", S},
                   {"m", m},
                   {"T", T},
                   {"seed", seed}};
    if (!out_path.empty()) write_json_file(out_path, out);
    std::cout << out.dump(2) << "\n";
    if (rep.max_rel_err > threshold) {
        std::fprintf(stderr, "gradcheck FAILED: %.3e > %.3e\n", rep.max_rel_err, threshold);
        return 1;
    }
    return 0;
}

// -------- verify --------

int cmd_verify(int S, int n, double alpha, std::size_t T, int k, double c, std::size_t num_seqs,
               uint64_t seed, const std::string& out_path) {
    const NGramSpec spec(S, n, alpha, seed);
    const ModelConfig cfg(S, std::max(n - 1, k - 1 > 0 ? k - 1 : 1), static_cast<int>(T));
    const auto emb = Embedding::one_hot(S);
    const auto params = build_kgram_params(cfg, emb, k, c);

    std::size_t wellposed = 0, empty_match = 0, collisions = 0, violation_count = 0;
    double max_equiv_err = 0.0;
    json violation_list = json::array();
    for (std::size_t i = 0; i < num_seqs; ++i) {
        Rng rng = Rng::substream(seed, "verify-lm", i);
        const auto tensor = sample_lm(spec, rng);
        const auto pi = stationary(tensor);
        Rng srng = Rng::substream(seed, "verify-seq", i);
        const auto seq = sample_sequence(tensor, pi, T, srng);
        if (match_set(seq, k).empty()) {
            ++empty_match;
            continue;
        }
        if (!boundary_collisions(seq, k).empty()) {
            ++collisions;
            continue;
        }
        ++wellposed;
        const auto rep = verify_attention_pattern(params, emb, seq, k, c);
        if (!rep.violations.empty()) {
            violation_count += rep.violations.size();
            if (violation_list.size() < 32)
                violation_list.push_back({{"sequence", i}, {"violations", rep.violations}});
        }
        const auto tr = forward(params, emb, seq);
        max_equiv_err = std::max(
            max_equiv_err, linf_distance(tr.p_out, kgram_predict(seq, S, k, Backoff::off)));
    }
    const json out{{"S", S},
                   {"n", n},
                   {"T", T},
                   {"k", k},
                   {"c", c},
                   {"num_sequences", num_seqs},
                   {"wellposed", wellposed},
                   {"empty_match_set", empty_match},
                   {"boundary_collisions", collisions},
                   {"pattern_violations", violation_count},
                   {"violation_samples", violation_list},
                   {"max_estimator_equivalence_err", max_equiv_err}};
    if (!out_path.empty()) write_json_file(out_path, out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// -------- probe --------

int cmd_probe(int S, int n, double alpha, int k, const std::string& c_grid,
              const std::string& t_grid, std::size_t batch, uint64_t seed,
              const std::string& out_csv, const std::string& out_svg) {
    ProbeTask task;
    task.spec = NGramSpec(S, n, alpha, seed);
    task.k = k;
    const auto cs = parse_double_list(c_grid);
    const auto Ts = parse_size_list(t_grid);
    const auto report = stationarity_probe(task, cs, Ts, batch);
    if (!out_csv.empty()) write_probe_csv(out_csv, report);
    for (const auto& cell : report.cells)
        std::printf("k=%d c=%.2f T=%zu  grad_norm=%.6e  pop=%.6e  tv=%.4f\n", cell.k, cell.c,
                    cell.T, cell.grad_norm_total, cell.grad_norm_pop, cell.mean_residual_tv);
    if (!out_svg.empty()) {
        std::vector<LineSeries> series;
        for (std::size_t ti = 0; ti < Ts.size(); ++ti) {
            LineSeries s;
            s.name = "T=" + std::to_string(Ts[ti]);
            s.color = "";
            for (const auto& cell : report.cells) {
                if (cell.T != Ts[ti]) continue;
                s.x.push_back(cell.c);
                s.y.push_back(cell.grad_norm_total);
            }
            series.push_back(std::move(s));
        }
        write_text_file(out_svg, line_chart_svg(series, "gradient norm at the k-gram construction",
                                                "c", "batch-mean gradient norm", true));
    }
    return 0;
}

// -------- train / sweep --------

TrainConfig make_train_config(int S, int n, double alpha, std::size_t T, int m, double lr,
                              double beta1, double beta2, double eps, double wd,
                              std::size_t batch, std::size_t iters, std::size_t eval_every,
                              const std::string& loss_mode, std::size_t start_t, uint64_t seed,
                              std::size_t test_size, const std::string& snapshots,
                              double init_sigma) {
    TrainConfig cfg;
    cfg.model = ModelConfig(S, m, static_cast<int>(T));
    cfg.task = NGramSpec(S, n, alpha, seed);
    cfg.T = T;
    cfg.lr = lr;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.eps = eps;
    cfg.weight_decay = wd;
    cfg.batch_size = batch;
    cfg.iters = iters;
    cfg.eval_every = eval_every;
    cfg.seed = seed;
    cfg.test_set_size = test_size;
    if (loss_mode == "averaged") {
        cfg.loss_mode = TrainConfig::LossMode::averaged_positions;
        cfg.start_t = start_t ? start_t : static_cast<std::size_t>(n);
    } else if (loss_mode != "final") {
        throw std::invalid_argument("loss-mode must be final or averaged");
    }
    if (!snapshots.empty()) cfg.snapshot_iters = parse_size_list(snapshots);
    cfg.init_v1 = InitSpec::gaussian(init_sigma);
    cfg.init_q2 = InitSpec::gaussian(init_sigma);
    return cfg;
}

json train_config_manifest(const TrainConfig& cfg) {
    return json{{"S", cfg.model.S},
                {"d", cfg.model.d},
                {"m", cfg.model.m},
                {"n", cfg.task.order},
                {"alpha", cfg.task.dirichlet_alpha},
                {"T", cfg.T},
                {"lr", cfg.lr},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"eps", cfg.eps},
                {"weight_decay", cfg.weight_decay},
                {"batch", cfg.batch_size},
                {"iters", cfg.iters},
                {"eval_every", cfg.eval_every},
                {"loss_mode", cfg.loss_mode == TrainConfig::LossMode::final_position
                                  ? "final"
                                  : "averaged"},
                {"start_t", cfg.start_t},
                {"seed", cfg.seed},
                {"test_size", cfg.test_set_size},
                {"snapshot_iters", cfg.snapshot_iters},
                {"init",
                 {{"a1", "zeros"},
                  {"k2", "zeros"},
                  {"v1_sigma", cfg.init_v1.sigma},
                  {"q2_sigma", cfg.init_q2.sigma}}},
                {"version", kVersion},
                {"version_hash", version_hash()}};
}

int cmd_train(TrainConfig cfg, std::size_t window_iters, double slope_tol, double match_tol,
              const std::string& out_dir) {
    cfg.validate();
    ensure_dir(out_dir);
    TrainResult res = train(cfg);
    res.log.plateaus = detect_plateaus(res.log, window_iters, slope_tol, match_tol);
    for (const auto& seg : res.log.plateaus)
        for (std::size_t i = seg.start_index; i <= seg.end_index; ++i)
            res.log.rows[i].plateau_label = seg.label;

    write_metrics_csv(out_dir + "/metrics.csv", res.log);
    write_json_file(out_dir + "/params.json", params_to_json(res.params));
    json manifest = train_config_manifest(cfg);
    manifest["plateau_detection"] = {{"window_iters", window_iters},
                                     {"slope_tol", slope_tol},
                                     {"match_tol", match_tol}};
    json plateaus = json::array();
    for (const auto& seg : res.log.plateaus)
        plateaus.push_back({{"start_iter", seg.start_iter},
                            {"end_iter", seg.end_iter},
                            {"mean_ce", seg.mean_ce},
                            {"label", seg.label}});
    manifest["plateaus"] = plateaus;
    write_json_file(out_dir + "/manifest.json", manifest);

    for (const auto& snap : res.log.snapshots) {
        for (std::size_t h = 0; h < snap.a1.size(); ++h) {
            const std::string base =
                out_dir + "/snapshot_iter" + std::to_string(snap.iter) + "_head" + std::to_string(h);
            write_matrix_csv(base + ".csv", snap.a1[h]);
            write_text_file(base + ".svg",
                            heatmap_svg(snap.a1[h], "first-layer attention, head " +
                                                        std::to_string(h) + ", iter " +
                                                        std::to_string(snap.iter)));
        }
        write_vector_csv(out_dir + "/snapshot_iter" + std::to_string(snap.iter) + "_a2.csv",
                         snap.a2);
    }

    // loss figure with dashed baseline levels
    {
        std::vector<LineSeries> series;
        LineSeries test_curve{"test CE", {}, {}, false, "#1f6fb2"};
        for (const auto& r : res.log.rows) {
            test_curve.x.push_back(static_cast<double>(r.iter));
            test_curve.y.push_back(r.test_ce);
        }
        series.push_back(std::move(test_curve));
        for (std::size_t k = 0; k < res.log.baseline_ces_smoothed.size(); ++k) {
            LineSeries b;
            b.name = std::to_string(k + 1) + "-gram level";
            b.dashed = true;
            b.color = "";
            b.x = {0.0, static_cast<double>(cfg.iters)};
            b.y = {res.log.baseline_ces_smoothed[k], res.log.baseline_ces_smoothed[k]};
            series.push_back(std::move(b));
        }
        write_text_file(out_dir + "/loss.svg",
                        line_chart_svg(series, "test cross-entropy", "iteration", "CE (nats)"));
    }
    // gradient-norm trace
    {
        LineSeries g{"grad norm", {}, {}, false, "#d1495b"};
        for (const auto& r : res.log.rows) {
            g.x.push_back(static_cast<double>(r.iter));
            g.y.push_back(r.grad_norm_total);
        }
        write_text_file(out_dir + "/gradnorm.svg",
                        line_chart_svg({g}, "batch gradient norm", "iteration", "norm", true));
    }

    std::printf("final test CE %.4f; baselines(raw)", res.log.rows.back().test_ce);
    for (double b : res.log.baseline_ces) std::printf(" %.4f", b);
    std::printf("; baselines(smoothed)");
    for (double b : res.log.baseline_ces_smoothed) std::printf(" %.4f", b);
    std::printf("; %zu plateau(s)\n", res.log.plateaus.size());
    return 0;
}

int cmd_sweep(TrainConfig cfg, const std::string& seeds_arg, std::size_t window_iters,
              double slope_tol, double match_tol, const std::string& out_path) {
    std::vector<uint64_t> seeds;
    for (auto v : parse_size_list(seeds_arg)) seeds.push_back(v);
    const auto rows = seed_sweep(cfg, seeds, window_iters, slope_tol, match_tol);
    CsvWriter csv(out_path);
    std::vector<std::string> hdr{"seed", "plateau_labels", "has_second_plateau"};
    for (int h = 0; h < cfg.model.m; ++h) {
        hdr.push_back("head" + std::to_string(h) + "_lag");
        hdr.push_back("head" + std::to_string(h) + "_mass");
    }
    csv.header(hdr);
    for (const auto& r : rows) {
        std::string labels;
        for (std::size_t i = 0; i < r.plateau_labels.size(); ++i) {
            if (i) labels += ';';
            labels += std::to_string(r.plateau_labels[i]);
        }
        std::vector<std::string> row{std::to_string(r.seed), labels,
                                     r.has_second_plateau ? "1" : "0"};
        for (int h = 0; h < cfg.model.m; ++h) {
            if (r.has_second_plateau && h < static_cast<int>(r.second_plateau.size())) {
                row.push_back(std::to_string(r.second_plateau[h].argmax_lag));
                row.push_back(fmt_double(r.second_plateau[h].mass));
            } else {
                row.push_back("");
                row.push_back("");
            }
        }
        csv.line(row);
    }
    std::printf("wrote %zu sweep rows to %s\n", rows.size(), out_path.c_str());
    return 0;
}

// -------- render --------

int cmd_render_line(const std::string& input, const std::string& out, const std::string& xcol,
                    const std::string& ycols_arg, bool logy) {
    std::ifstream in(input);
    if (!in) throw std::invalid_argument("cannot open: " + input);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + input);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::invalid_argument("no column named " + name);
    };
    const std::size_t xi = col_index(xcol);
    std::vector<std::string> ycols;
    {
        std::stringstream ss(ycols_arg);
        std::string cell;
        while (std::getline(ss, cell, ',')) ycols.push_back(cell);
    }
    std::vector<LineSeries> series(ycols.size());
    std::vector<std::size_t> yidx;
    for (std::size_t i = 0; i < ycols.size(); ++i) {
        series[i].name = ycols[i];
        series[i].color = "";
        yidx.push_back(col_index(ycols[i]));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        for (std::size_t i = 0; i < ycols.size(); ++i) {
            if (yidx[i] >= cells.size() || cells[yidx[i]].empty()) continue;
            series[i].x.push_back(std::stod(cells[xi]));
            series[i].y.push_back(std::stod(cells[yidx[i]]));
        }
    }
    write_text_file(out, line_chart_svg(series, fs::path(input).filename().string(), xcol,
                                        ycols_arg, logy));
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_render_heatmap(const std::string& input, const std::string& out) {
    std::ifstream in(input);
    if (!in) throw std::invalid_argument("cannot open: " + input);
    std::string line;
    std::getline(in, line);   // header
    std::vector<Vector> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vector row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("no data rows in " + input);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    write_text_file(out, heatmap_svg(m, fs::path(input).filename().string()));
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-context n-gram laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "sample language models and sequence batches");
    int g_S = 5, g_n = 3;
    double g_alpha = 0.5;
    std::size_t g_T = 32, g_batch = 128, g_lms = 1;
    uint64_t g_seed = 0;
    std::string g_out = "out/gen";
    JsonDefaults gd;
    gd.bind(gen->add_option("--S", g_S, "alphabet size"), g_S, "S");
    gd.bind(gen->add_option("--n", g_n, "model order"), g_n, "n");
    gd.bind(gen->add_option("--alpha", g_alpha, "Dirichlet parameter"), g_alpha, "alpha");
    gd.bind(gen->add_option("--T", g_T, "sequence length"), g_T, "T");
    gd.bind(gen->add_option("--batch", g_batch, "number of sequences"), g_batch, "batch");
    gd.bind(gen->add_option("--num-lms", g_lms, "language models to sample"), g_lms, "num_lms");
    gd.bind(gen->add_option("--seed", g_seed, "master seed"), g_seed, "seed");
    gd.bind(gen->add_option("--out", g_out, "output directory"), g_out, "out");
    gen->add_option("--config", config_path, "JSON config file (flags override)");

    // ---- baselines ----
    auto* baselines = app.add_subcommand("baselines", "estimator cross-entropy table");
    int b_S = 5, b_n = 3, b_kmax = 3;
    double b_alpha = 0.5;
    std::size_t b_T = 32, b_size = 4096;
    uint64_t b_seed = 0;
    std::string b_lags, b_out = "baselines.csv";
    JsonDefaults bd;
    bd.bind(baselines->add_option("--S", b_S, "alphabet size"), b_S, "S");
    bd.bind(baselines->add_option("--n", b_n, "model order"), b_n, "n");
    bd.bind(baselines->add_option("--alpha", b_alpha, "Dirichlet parameter"), b_alpha, "alpha");
    bd.bind(baselines->add_option("--T", b_T, "sequence length"), b_T, "T");
    bd.bind(baselines->add_option("--test-size", b_size, "sequences"), b_size, "test_size");
    bd.bind(baselines->add_option("--kmax", b_kmax, "largest k"), b_kmax, "kmax");
    bd.bind(baselines->add_option("--lags", b_lags, "extra subset estimator, e.g. 1,3"), b_lags,
            "lags");
    bd.bind(baselines->add_option("--seed", b_seed, "master seed"), b_seed, "seed");
    bd.bind(baselines->add_option("--out", b_out, "output CSV"), b_out, "out");
    baselines->add_option("--config", config_path, "JSON config file (flags override)");

    // ---- gradcheck ----
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    int gc_S = 3, gc_m = 2;
    std::size_t gc_T = 8;
    uint64_t gc_seed = 0;
    double gc_step = 1e-4, gc_threshold = 1e-5;
    std::string gc_out;
    JsonDefaults gcd;
    gcd.bind(gradcheck->add_option("--S", gc_S, "alphabet size"), gc_S, "S");
    gcd.bind(gradcheck->add_option("--m", gc_m, "heads"), gc_m, "m");
    gcd.bind(gradcheck->add_option("--T", gc_T, "sequence length"), gc_T, "T");
    gcd.bind(gradcheck->add_option("--seed", gc_seed, "master seed"), gc_seed, "seed");
    gcd.bind(gradcheck->add_option("--step", gc_step, "FD step"), gc_step, "step");
    gcd.bind(gradcheck->add_option("--threshold", gc_threshold, "max relative error"),
             gc_threshold, "threshold");
    gcd.bind(gradcheck->add_option("--out", gc_out, "output JSON"), gc_out, "out");
    gradcheck->add_option("--config", config_path, "JSON config file (flags override)");

    // ---- verify ----
    auto* verify = app.add_subcommand("verify", "attention-pattern and estimator equivalence");
    int v_S = 3, v_n = 3, v_k = 2;
    double v_alpha = 0.5, v_c = 50.0;
    std::size_t v_T = 32, v_num = 256;
    uint64_t v_seed = 0;
    std::string v_out;
    JsonDefaults vd;
    vd.bind(verify->add_option("--S", v_S, "alphabet size"), v_S, "S");
    vd.bind(verify->add_option("--n", v_n, "model order"), v_n, "n");
    vd.bind(verify->add_option("--alpha", v_alpha, "Dirichlet parameter"), v_alpha, "alpha");
    vd.bind(verify->add_option("--T", v_T, "sequence length"), v_T, "T");
    vd.bind(verify->add_option("--k", v_k, "construction order"), v_k, "k");
    vd.bind(verify->add_option("--c", v_c, "construction scale"), v_c, "c");
    vd.bind(verify->add_option("--num-seqs", v_num, "sequences"), v_num, "num_seqs");
    vd.bind(verify->add_option("--seed", v_seed, "master seed"), v_seed, "seed");
    vd.bind(verify->add_option("--out", v_out, "output JSON"), v_out, "out");
    verify->add_option("--config", config_path, "JSON config file (flags override)");

    // ---- probe ----
    auto* probe = app.add_subcommand("probe", "near-stationarity gradient-norm probe");
    int p_S = 3, p_n = 3, p_k = 2;
    double p_alpha = 0.5;
    std::string p_cs = "6,8,10,12,14", p_Ts = "64";
    std::size_t p_batch = 512;
    uint64_t p_seed = 0;
    std::string p_csv = "probe.csv", p_svg;
    JsonDefaults pd;
    pd.bind(probe->add_option("--S", p_S, "alphabet size"), p_S, "S");
    pd.bind(probe->add_option("--n", p_n, "model order"), p_n, "n");
    pd.bind(probe->add_option("--alpha", p_alpha, "Dirichlet parameter"), p_alpha, "alpha");
    pd.bind(probe->add_option("--k", p_k, "construction order"), p_k, "k");
    pd.bind(probe->add_option("--c-grid", p_cs, "comma-separated c values"), p_cs, "c_grid");
    pd.bind(probe->add_option("--T-grid", p_Ts, "comma-separated T values"), p_Ts, "T_grid");
    pd.bind(probe->add_option("--batch", p_batch, "samples per cell"), p_batch, "batch");
    pd.bind(probe->add_option("--seed", p_seed, "master seed"), p_seed, "seed");
    pd.bind(probe->add_option("--out-csv", p_csv, "output CSV"), p_csv, "out_csv");
    pd.bind(probe->add_option("--out-svg", p_svg, "output SVG"), p_svg, "out_svg");
    probe->add_option("--config", config_path, "JSON config file (flags override)");

    // ---- train / sweep ----
    int t_S = 5, t_n = 3, t_m = 2;
    double t_alpha = 0.5, t_lr = 0.01, t_beta1 = 0.9, t_beta2 = 0.999, t_eps = 1e-8, t_wd = 0.0;
    std::size_t t_T = 32, t_batch = 128, t_iters = 1 << 14, t_eval = 128, t_start = 0;
    std::size_t t_test = 1 << 16, t_window = 256;
    double t_slope_tol = 1e-5, t_match_tol = 0.1, t_sigma = 0.02;
    std::string t_loss = "final", t_snapshots, t_out = "out/train", t_seeds = "1,2,3,4,5";
    uint64_t t_seed = 1;
    std::string sweep_out = "sweep.csv";

    auto add_train_options = [&](CLI::App* cmd, JsonDefaults& jd) {
        jd.bind(cmd->add_option("--S", t_S, "alphabet size"), t_S, "S");
        jd.bind(cmd->add_option("--n", t_n, "model order"), t_n, "n");
        jd.bind(cmd->add_option("--m", t_m, "first-layer heads"), t_m, "m");
        jd.bind(cmd->add_option("--alpha", t_alpha, "Dirichlet parameter"), t_alpha, "alpha");
        jd.bind(cmd->add_option("--T", t_T, "sequence length"), t_T, "T");
        jd.bind(cmd->add_option("--lr", t_lr, "learning rate"), t_lr, "lr");
        jd.bind(cmd->add_option("--beta1", t_beta1, "Adam beta1"), t_beta1, "beta1");
        jd.bind(cmd->add_option("--beta2", t_beta2, "Adam beta2"), t_beta2, "beta2");
        jd.bind(cmd->add_option("--eps", t_eps, "Adam epsilon"), t_eps, "eps");
        jd.bind(cmd->add_option("--weight-decay", t_wd, "decoupled weight decay"), t_wd,
                "weight_decay");
        jd.bind(cmd->add_option("--batch", t_batch, "batch size"), t_batch, "batch");
        jd.bind(cmd->add_option("--iters", t_iters, "iterations"), t_iters, "iters");
        jd.bind(cmd->add_option("--eval-every", t_eval, "evaluation period"), t_eval,
                "eval_every");
        jd.bind(cmd->add_option("--loss-mode", t_loss, "final | averaged"), t_loss, "loss_mode");
        jd.bind(cmd->add_option("--start-t", t_start, "first predicted position (averaged)"),
                t_start, "start_t");
        jd.bind(cmd->add_option("--seed", t_seed, "master seed"), t_seed, "seed");
        jd.bind(cmd->add_option("--test-size", t_test, "test sequences"), t_test, "test_size");
        jd.bind(cmd->add_option("--snapshots", t_snapshots, "snapshot iterations, e.g. 0,5000"),
                t_snapshots, "snapshots");
        jd.bind(cmd->add_option("--init-sigma", t_sigma, "Gaussian init scale for V1/Q2"),
                t_sigma, "init_sigma");
        jd.bind(cmd->add_option("--window", t_window, "plateau window (iterations)"), t_window,
                "window");
        jd.bind(cmd->add_option("--slope-tol", t_slope_tol, "plateau slope tolerance"),
                t_slope_tol, "slope_tol");
        jd.bind(cmd->add_option("--match-tol", t_match_tol, "plateau label tolerance"),
                t_match_tol, "match_tol");
        cmd->add_option("--config", config_path, "JSON config file (flags override)");
    };

    auto* train_cmd = app.add_subcommand("train", "Adam training with metric logging");
    JsonDefaults td;
    add_train_options(train_cmd, td);
    td.bind(train_cmd->add_option("--out", t_out, "output directory"), t_out, "out");

    auto* sweep_cmd = app.add_subcommand("sweep", "multi-seed training sweep");
    JsonDefaults sd;
    add_train_options(sweep_cmd, sd);
    sd.bind(sweep_cmd->add_option("--seeds", t_seeds, "comma-separated seeds"), t_seeds, "seeds");
    sd.bind(sweep_cmd->add_option("--out", sweep_out, "output CSV"), sweep_out, "out");

    // ---- render ----
    auto* render = app.add_subcommand("render", "re-render SVG figures from CSVs");
    std::string r_kind = "line", r_in, r_out = "figure.svg", r_x = "iter", r_y = "test_ce";
    bool r_logy = false;
    render->add_option("--kind", r_kind, "line | heatmap");
    render->add_option("--input", r_in, "input CSV")->required();
    render->add_option("--out", r_out, "output SVG");
    render->add_option("--x", r_x, "x column (line)");
    render->add_option("--y", r_y, "comma-separated y columns (line)");
    render->add_flag("--logy", r_logy, "log-scale y axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            gd.apply(config_path);
            return cmd_gen(g_S, g_n, g_alpha, g_T, g_batch, g_lms, g_seed, g_out);
        }
        if (baselines->parsed()) {
            bd.apply(config_path);
            return cmd_baselines(b_S, b_n, b_alpha, b_T, b_size, b_kmax, b_seed, b_lags, b_out);
        }
        if (gradcheck->parsed()) {
            gcd.apply(config_path);
            return cmd_gradcheck(gc_S, gc_m, gc_T, gc_seed, gc_step, gc_threshold, gc_out);
        }
        if (verify->parsed()) {
            vd.apply(config_path);
            return cmd_verify(v_S, v_n, v_alpha, v_T, v_k, v_c, v_num, v_seed, v_out);
        }
        if (probe->parsed()) {
            pd.apply(config_path);
            return cmd_probe(p_S, p_n, p_alpha, p_k, p_cs, p_Ts, p_batch, p_seed, p_csv, p_svg);
        }
        if (train_cmd->parsed()) {
            td.apply(config_path);
            return cmd_train(make_train_config(t_S, t_n, t_alpha, t_T, t_m, t_lr, t_beta1,
                                               t_beta2, t_eps, t_wd, t_batch, t_iters, t_eval,
                                               t_loss, t_start, t_seed, t_test, t_snapshots,
                                               t_sigma),
                             t_window, t_slope_tol, t_match_tol, t_out);
        }
        if (sweep_cmd->parsed()) {
            sd.apply(config_path);
            return cmd_sweep(make_train_config(t_S, t_n, t_alpha, t_T, t_m, t_lr, t_beta1,
                                               t_beta2, t_eps, t_wd, t_batch, t_iters, t_eval,
                                               t_loss, t_start, t_seed, t_test, t_snapshots,
                                               t_sigma),
                             t_seeds, t_window, t_slope_tol, t_match_tol, sweep_out);
        }
        if (render->parsed()) {
            if (r_kind == "line") return cmd_render_line(r_in, r_out, r_x, r_y, r_logy);
            if (r_kind == "heatmap") return cmd_render_heatmap(r_in, r_out);
            throw std::invalid_argument("unknown render kind: " + r_kind);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
