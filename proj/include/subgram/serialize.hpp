// JSON and CSV formats for the on-disk artifacts. All doubles are printed
// with %.17g so repeated runs are byte-identical and values round-trip.
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "subgram/constructions.hpp"
#include "subgram/matrix.hpp"
#include "subgram/seqmodel.hpp"
#include "subgram/training.hpp"
#include "subgram/transformer.hpp"

namespace subgram {

using json = nlohmann::json;

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// -------- JSON --------

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j.at(0).size() : 0;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

inline json tensor_to_json(const TransitionTensor& t) {
    return json{{"spec",
                 {{"S", t.spec.alphabet_size},
                  {"n", t.spec.order},
                  {"alpha", t.spec.dirichlet_alpha},
                  {"seed", t.spec.seed}}},
                {"rows", matrix_to_json(t.rows)}};
}

inline TransitionTensor tensor_from_json(const json& j) {
    TransitionTensor t;
    t.spec = NGramSpec(j.at("spec").at("S").get<int>(), j.at("spec").at("n").get<int>(),
                       j.at("spec").at("alpha").get<double>(),
                       j.at("spec").at("seed").get<uint64_t>());
    t.rows = matrix_from_json(j.at("rows"));
    t.validate();
    return t;
}

inline json params_to_json(const ModelParams& p) {
    json a1 = json::array(), v1 = json::array();
    for (const auto& m : p.A1) a1.push_back(matrix_to_json(m));
    for (const auto& m : p.V1) v1.push_back(matrix_to_json(m));
    return json{{"config", {{"S", p.config.S}, {"d", p.config.d}, {"m", p.config.m},
                            {"T_max", p.config.T_max}}},
                {"shapes",
                 {{"A1", {p.config.T_max, p.config.T_max}},
                  {"V1", {p.config.d, p.config.d}},
                  {"K2", {p.config.dh(), p.config.d1()}},
                  {"Q2", {p.config.dh(), p.config.d1()}}}},
                {"A1", std::move(a1)},
                {"V1", std::move(v1)},
                {"K2", matrix_to_json(p.K2)},
                {"Q2", matrix_to_json(p.Q2)},
                {"fixed_length", p.fixed_length}};
}

inline ModelParams params_from_json(const json& j) {
    const auto& c = j.at("config");
    ModelConfig cfg(c.at("S").get<int>(), c.at("m").get<int>(), c.at("T_max").get<int>(),
                    c.at("d").get<int>());
    ModelParams p = ModelParams::zeros(cfg);
    for (int h = 0; h < cfg.m; ++h) {
        p.A1[h] = matrix_from_json(j.at("A1").at(h));
        p.V1[h] = matrix_from_json(j.at("V1").at(h));
    }
    p.K2 = matrix_from_json(j.at("K2"));
    p.Q2 = matrix_from_json(j.at("Q2"));
    p.fixed_length = j.value("fixed_length", std::size_t{0});
    p.validate();
    return p;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

inline void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

// -------- CSV --------

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }
    void header(const std::vector<std::string>& cols) { line(cols); }
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_sequences_csv(const std::string& path, const SequenceBatch& batch) {
    CsvWriter csv(path);
    std::vector<std::string> hdr{"lm_index"};
    const std::size_t T = batch.sequences.empty() ? 0 : batch.sequences.front().size();
    for (std::size_t t = 0; t < T; ++t) hdr.push_back("t" + std::to_string(t));
    csv.header(hdr);
    for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
        std::vector<std::string> row{std::to_string(batch.lm_index[b])};
        for (int tok : batch.sequences[b]) row.push_back(std::to_string(tok));
        csv.line(row);
    }
}

inline SequenceBatch read_sequences_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);
    SequenceBatch batch;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            continue;
        }
        Sequence seq;
        std::stringstream ss(line);
        std::string cell;
        bool lm = true;
        while (std::getline(ss, cell, ',')) {
            if (lm) {
                batch.lm_index.push_back(std::stoull(cell));
                lm = false;
            } else {
                seq.push_back(std::stoi(cell));
            }
        }
        batch.sequences.push_back(std::move(seq));
    }
    return batch;
}

inline void write_probe_csv(const std::string& path, const StationarityReport& report) {
    CsvWriter csv(path);
    csv.header({"k", "c", "T", "batch_size", "grad_norm_total", "grad_norm_a1", "grad_norm_v1",
                "grad_norm_k2", "grad_norm_q2", "grad_norm_pop", "mean_residual_tv",
                "mean_residual_sq"});
    for (const auto& cell : report.cells)
        csv.line({std::to_string(cell.k), fmt_double(cell.c), std::to_string(cell.T),
                  std::to_string(cell.batch_size), fmt_double(cell.grad_norm_total),
                  fmt_double(cell.grad_norm_a1), fmt_double(cell.grad_norm_v1),
                  fmt_double(cell.grad_norm_k2), fmt_double(cell.grad_norm_q2),
                  fmt_double(cell.grad_norm_pop), fmt_double(cell.mean_residual_tv),
                  fmt_double(cell.mean_residual_sq)});
}

inline void write_metrics_csv(const std::string& path, const MetricsLog& log) {
    CsvWriter csv(path);
    std::vector<std::string> hdr{"iter",         "train_ce",     "test_ce",
                                 "grad_norm_total", "grad_norm_a1", "grad_norm_v1",
                                 "grad_norm_k2", "grad_norm_q2"};
    for (std::size_t k = 1; k <= log.baseline_ces.size(); ++k)
        hdr.push_back("baseline_ce_k" + std::to_string(k));
    for (std::size_t k = 1; k <= log.baseline_ces_smoothed.size(); ++k)
        hdr.push_back("baseline_ce_smoothed_k" + std::to_string(k));
    const std::size_t m = log.rows.empty() ? 0 : log.rows.front().head_lag_mass.size();
    const std::size_t L =
        log.rows.empty() || m == 0 ? 0 : log.rows.front().head_lag_mass.front().size();
    for (std::size_t h = 0; h < m; ++h)
        for (std::size_t l = 1; l <= L; ++l)
            hdr.push_back("head" + std::to_string(h) + "_lag" + std::to_string(l) + "_mass");
    hdr.push_back("plateau_label");
    csv.header(hdr);
    for (const auto& r : log.rows) {
        std::vector<std::string> row{std::to_string(r.iter),
                                     fmt_double(r.train_ce),
                                     fmt_double(r.test_ce),
                                     fmt_double(r.grad_norm_total),
                                     fmt_double(r.grad_norm_a1),
                                     fmt_double(r.grad_norm_v1),
                                     fmt_double(r.grad_norm_k2),
                                     fmt_double(r.grad_norm_q2)};
        for (double b : log.baseline_ces) row.push_back(fmt_double(b));
        for (double b : log.baseline_ces_smoothed) row.push_back(fmt_double(b));
        for (const auto& per_head : r.head_lag_mass)
            for (double v : per_head) row.push_back(fmt_double(v));
        row.push_back(r.plateau_label > 0 ? std::to_string(r.plateau_label) : "");
        csv.line(row);
    }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
    CsvWriter csv(path);
    std::vector<std::string> hdr;
    for (std::size_t j = 0; j < m.cols(); ++j) hdr.push_back("c" + std::to_string(j));
    csv.header(hdr);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row;
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(fmt_double(m(i, j)));
        csv.line(row);
    }
}

inline void write_vector_csv(const std::string& path, const Vector& v) {
    Matrix m(1, v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
    write_matrix_csv(path, m);
}

} // namespace subgram
