#ifndef IRTCL_FORMATS_HPP
#define IRTCL_FORMATS_HPP

#include "crowd.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "irt_core.hpp"
#include "trainer.hpp"
#include "vi_fitter.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

/**
 * @file formats.hpp
 * @brief On-disk formats.
 *
 * - Response matrix, dense CSV: header `model_id,<item ids...>`, one row per model, cells 0/1
 *   (an empty cell is a missing response).
 * - Response matrix, long JSONL: one `{"model_id", "item_id", "correct"}` object per line.
 * - Difficulty CSV: `item_id,difficulty`. Ability CSV: `model_id,ability`.
 * - Dataset CSV: `id,f0..f{d-1},label[,planted_margin][,text]`.
 *
 * Lines beginning with `#` are comments in every CSV and are skipped on read. Reals are
 * written in shortest round-trip form.
 */

namespace irtcl {

using json = nlohmann::json;

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw FormatError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

namespace csv {

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k > 0) {
            out += ',';
        }
        out += quote(fields[k]);
    }
    return out;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

/// Non-comment, non-blank rows, split into fields. Trailing CR is stripped.
inline std::vector<std::vector<std::string>> read_rows(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        rows.push_back(split(line));
    }
    return rows;
}

} // namespace csv

inline std::ifstream open_input(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw FormatError("cannot open " + p.string());
    }
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + p.string());
    }
    return out;
}

/// Optional comment line carried at the top of pipeline outputs.
inline void write_comment(std::ostream& out, const std::string& comment) {
    if (!comment.empty()) {
        out << "# " << comment << '\n';
    }
}

// ---- response matrices ----

inline void write_response_csv(std::ostream& out, const ResponseMatrix& z, const std::string& comment = {}) {
    write_comment(out, comment);
    std::vector<std::string> header{"model_id"};
    header.insert(header.end(), z.item_ids().begin(), z.item_ids().end());
    out << csv::join(header) << '\n';
    for (std::size_t j = 0; j < z.n_models(); ++j) {
        out << csv::quote(z.model_ids()[j]);
        for (auto c : z.row(j)) {
            out << ',';
            if (c != ResponseMatrix::kMissing) {
                out << static_cast<int>(c);
            }
        }
        out << '\n';
    }
}

inline ResponseMatrix read_response_csv(std::istream& in) {
    const auto rows = csv::read_rows(in);
    if (rows.size() < 2) {
        throw FormatError("response CSV: need a header and at least one model row");
    }
    const auto& header = rows.front();
    std::vector<std::string> items(header.begin() + 1, header.end());
    std::vector<std::string> models;
    std::vector<std::int8_t> cells;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw FormatError("response CSV: row " + std::to_string(r) + " has " + std::to_string(row.size()) + " fields, expected " +
                              std::to_string(header.size()));
        }
        models.push_back(row[0]);
        for (std::size_t k = 1; k < row.size(); ++k) {
            if (row[k].empty()) {
                cells.push_back(ResponseMatrix::kMissing);
            } else if (row[k] == "0" || row[k] == "1") {
                cells.push_back(static_cast<std::int8_t>(row[k][0] - '0'));
            } else {
                throw FormatError("response CSV: cell must be 0 or 1, got '" + row[k] + "'");
            }
        }
    }
    return ResponseMatrix(std::move(models), std::move(items), std::move(cells));
}

inline void write_response_jsonl(std::ostream& out, const ResponseMatrix& z) {
    for (std::size_t j = 0; j < z.n_models(); ++j) {
        for (std::size_t i = 0; i < z.n_items(); ++i) {
            if (z.observed(j, i)) {
                json obj{{"model_id", z.model_ids()[j]}, {"item_id", z.item_ids()[i]}, {"correct", static_cast<int>(z.at(j, i))}};
                out << obj.dump() << '\n';
            }
        }
    }
}

/// Long format. Models and items are ordered by first appearance; absent cells stay missing.
inline ResponseMatrix read_response_jsonl(std::istream& in) {
    std::vector<std::string> models, items;
    std::unordered_map<std::string, std::size_t> model_pos, item_pos;
    std::vector<std::tuple<std::size_t, std::size_t, int>> triples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("response JSONL line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.contains("model_id") || !obj.contains("item_id") || !obj.contains("correct")) {
            throw FormatError("response JSONL line " + std::to_string(lineno) + ": need model_id, item_id and correct");
        }
        auto id_of = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        const auto mid = id_of(obj["model_id"]);
        const auto iid = id_of(obj["item_id"]);
        const auto& c = obj["correct"];
        int v = -1;
        if (c.is_boolean()) {
            v = c.get<bool>() ? 1 : 0;
        } else if (c.is_number_integer()) {
            v = c.get<int>();
        }
        if (v != 0 && v != 1) {
            throw FormatError("response JSONL line " + std::to_string(lineno) + ": correct must be 0 or 1");
        }
        auto [mit, mnew] = model_pos.try_emplace(mid, models.size());
        if (mnew) {
            models.push_back(mid);
        }
        auto [iit, inew] = item_pos.try_emplace(iid, items.size());
        if (inew) {
            items.push_back(iid);
        }
        triples.emplace_back(mit->second, iit->second, v);
    }
    if (models.empty()) {
        throw FormatError("response JSONL: no responses");
    }
    ResponseMatrix z(models, items);
    for (const auto& [j, i, v] : triples) {
        z.set(j, i, v);
    }
    return z;
}

/// Dispatch on extension: `.jsonl` is long format, anything else dense CSV.
inline ResponseMatrix read_response_file(const std::filesystem::path& p) {
    auto in = open_input(p);
    return p.extension() == ".jsonl" ? read_response_jsonl(in) : read_response_csv(in);
}

inline void write_response_file(const std::filesystem::path& p, const ResponseMatrix& z, const std::string& comment = {}) {
    auto out = open_output(p);
    if (p.extension() == ".jsonl") {
        write_response_jsonl(out, z);
    } else {
        write_response_csv(out, z, comment);
    }
}

// ---- parameter tables ----

struct NamedValues {
    std::vector<std::string> ids;
    std::vector<double> values;

    /// Value for `id`; throws if absent.
    double at(const std::string& id) const {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (ids[k] == id) {
                return values[k];
            }
        }
        throw FormatError("no value for id " + id);
    }

    std::unordered_map<std::string, double> map() const {
        std::unordered_map<std::string, double> m;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            m.emplace(ids[k], values[k]);
        }
        return m;
    }
};

inline void write_named_csv(std::ostream& out, const std::string& id_col, const std::string& value_col, const std::vector<std::string>& ids,
                            std::span<const double> values, const std::string& comment = {}) {
    detail::require(ids.size() == values.size(), "write_named_csv: id/value length mismatch");
    write_comment(out, comment);
    out << id_col << ',' << value_col << '\n';
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out << csv::quote(ids[k]) << ',' << format_double(values[k]) << '\n';
    }
}

inline NamedValues read_named_csv(std::istream& in, const std::string& id_col, const std::string& value_col) {
    const auto rows = csv::read_rows(in);
    if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != id_col || rows.front()[1] != value_col) {
        throw FormatError("expected CSV header '" + id_col + "," + value_col + "'");
    }
    NamedValues nv;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 2) {
            throw FormatError("CSV row " + std::to_string(r) + " is short");
        }
        nv.ids.push_back(rows[r][0]);
        nv.values.push_back(parse_double(rows[r][1]));
    }
    return nv;
}

inline void write_difficulty_csv(std::ostream& out, const std::vector<std::string>& item_ids, std::span<const double> bs,
                                 const std::string& comment = {}) {
    write_named_csv(out, "item_id", "difficulty", item_ids, bs, comment);
}

inline NamedValues read_difficulty_csv(std::istream& in) { return read_named_csv(in, "item_id", "difficulty"); }

inline NamedValues read_difficulty_file(const std::filesystem::path& p) {
    auto in = open_input(p);
    return read_difficulty_csv(in);
}

inline void write_ability_csv(std::ostream& out, const std::vector<std::string>& model_ids, std::span<const double> thetas,
                              const std::string& comment = {}) {
    write_named_csv(out, "model_id", "ability", model_ids, thetas, comment);
}

/// Graded responses of one model: `item_id,correct`.
inline std::pair<std::vector<std::string>, std::vector<std::int8_t>> read_graded_csv(std::istream& in) {
    const auto rows = csv::read_rows(in);
    if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != "item_id" || rows.front()[1] != "correct") {
        throw FormatError("expected CSV header 'item_id,correct'");
    }
    std::vector<std::string> ids;
    std::vector<std::int8_t> z;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 2 || (rows[r][1] != "0" && rows[r][1] != "1")) {
            throw FormatError("graded CSV row " + std::to_string(r) + ": correct must be 0 or 1");
        }
        ids.push_back(rows[r][0]);
        z.push_back(static_cast<std::int8_t>(rows[r][1][0] - '0'));
    }
    return {std::move(ids), std::move(z)};
}

// ---- datasets ----

inline void write_dataset_csv(std::ostream& out, const Dataset& d, const std::string& comment = {}) {
    d.validate();
    write_comment(out, comment);
    std::vector<std::string> header{"id"};
    for (std::size_t f = 0; f < d.n_features; ++f) {
        header.push_back("f" + std::to_string(f));
    }
    header.emplace_back("label");
    if (!d.planted_margin.empty()) {
        header.emplace_back("planted_margin");
    }
    if (!d.text.empty()) {
        header.emplace_back("text");
        header.emplace_back("text_pair");
    }
    out << csv::join(header) << '\n';
    for (std::size_t k = 0; k < d.size(); ++k) {
        std::vector<std::string> fields{d.ids[k]};
        for (double v : d.row(k)) {
            fields.push_back(format_double(v));
        }
        fields.push_back(std::to_string(d.labels[k]));
        if (!d.planted_margin.empty()) {
            fields.push_back(format_double(d.planted_margin[k]));
        }
        if (!d.text.empty()) {
            fields.push_back(d.text[k].first);
            fields.push_back(d.text[k].second);
        }
        out << csv::join(fields) << '\n';
    }
}

/// Columns are located by name; `n_classes` is at least 2 and at least max(label) + 1.
inline Dataset read_dataset_csv(std::istream& in, std::size_t n_classes = 2) {
    const auto rows = csv::read_rows(in);
    if (rows.empty()) {
        throw FormatError("dataset CSV: missing header");
    }
    const auto& header = rows.front();
    std::vector<std::size_t> feature_cols;
    std::optional<std::size_t> id_col, label_col, margin_col, text_col, pair_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h == "id") id_col = c;
        else if (h == "label") label_col = c;
        else if (h == "planted_margin") margin_col = c;
        else if (h == "text") text_col = c;
        else if (h == "text_pair") pair_col = c;
        else if (h.size() > 1 && h[0] == 'f' && h.find_first_not_of("0123456789", 1) == std::string::npos) feature_cols.push_back(c);
    }
    if (!label_col || feature_cols.empty()) {
        throw FormatError("dataset CSV: need a label column and at least one f<k> feature column");
    }
    Dataset d;
    d.n_features = feature_cols.size();
    int max_label = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw FormatError("dataset CSV: row " + std::to_string(r) + " has the wrong number of fields");
        }
        d.ids.push_back(id_col ? row[*id_col] : "row-" + std::to_string(r - 1));
        for (std::size_t c : feature_cols) {
            d.features.push_back(parse_double(row[c]));
        }
        const int y = static_cast<int>(parse_double(row[*label_col]));
        if (y < 0) {
            throw FormatError("dataset CSV: negative label");
        }
        max_label = std::max(max_label, y);
        d.labels.push_back(y);
        if (margin_col) {
            d.planted_margin.push_back(parse_double(row[*margin_col]));
        }
        if (text_col) {
            d.text.push_back({row[*text_col], pair_col ? row[*pair_col] : std::string{}});
        }
    }
    d.n_classes = std::max<std::size_t>({n_classes, 2, static_cast<std::size_t>(max_label) + 1});
    d.validate();
    return d;
}

inline Dataset read_dataset_file(const std::filesystem::path& p, std::size_t n_classes = 2) {
    auto in = open_input(p);
    return read_dataset_csv(in, n_classes);
}

inline void write_dataset_file(const std::filesystem::path& p, const Dataset& d, const std::string& comment = {}) {
    auto out = open_output(p);
    write_dataset_csv(out, d, comment);
}

// ---- reports ----

inline json fit_report_json(const IrtPosterior& p, const FitConfig& cfg) {
    return json{
        {"final_elbo", p.final_elbo},
        {"iterations", p.iterations_run},
        {"converged", p.converged},
        {"warnings", p.warnings},
        {"n_models", p.model_ids.size()},
        {"n_items", p.item_ids.size()},
        {"hyper",
         {{"ability_mean", p.ability_hyper.mean_mean},
          {"ability_precision", p.ability_hyper.precision_mean},
          {"difficulty_mean", p.difficulty_hyper.mean_mean},
          {"difficulty_precision", p.difficulty_hyper.precision_mean}}},
        {"config",
         {{"max_iterations", cfg.max_iterations},
          {"learning_rate", cfg.learning_rate},
          {"mc_samples", cfg.mc_samples},
          {"seed", cfg.seed},
          {"convergence_tol", cfg.convergence_tol}}},
    };
}

inline json crowd_manifest_json(const CrowdResult& c) {
    json members = json::array();
    for (const auto& m : c.members) {
        members.push_back({{"model_id", m.model_id},
                           {"fraction", m.fraction},
                           {"flip_prob", m.flip_prob},
                           {"train_size", m.train_size},
                           {"accuracy", m.accuracy}});
    }
    return json{{"members", members}, {"warnings", c.warnings}};
}

/// Member predictions, one row per member, one column per example.
inline void write_predictions_csv(std::ostream& out, const CrowdResult& c, const std::string& comment = {}) {
    write_comment(out, comment);
    std::vector<std::string> header{"model_id"};
    header.insert(header.end(), c.responses.item_ids().begin(), c.responses.item_ids().end());
    out << csv::join(header) << '\n';
    for (const auto& m : c.members) {
        out << csv::quote(m.model_id);
        for (int p : m.predictions) {
            out << ',' << p;
        }
        out << '\n';
    }
}

/// Wall time is excluded so that reruns produce identical files.
inline json train_result_json(const TrainResult& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        json rec{{"epoch", e.epoch},
                 {"selected_count", e.selected_count},
                 {"fallback", e.fallback},
                 {"loss", e.loss},
                 {"train_acc", e.train_acc},
                 {"dev_acc", e.dev_acc}};
        rec["theta_hat"] = e.theta_hat ? json(*e.theta_hat) : json(nullptr);
        if (e.theta_hat) {
            rec["theta_clamped"] = e.theta_clamped;
        }
        epochs.push_back(std::move(rec));
    }
    return json{{"strategy", r.strategy},
                {"seed", r.seed},
                {"convergence_epoch", r.convergence_epoch},
                {"best_dev_acc", r.best_dev_acc},
                {"test_acc", r.test_acc},
                {"train_size", r.train_size},
                {"dev_size", r.dev_indices.size()},
                {"probe_size", r.probe_indices.size()},
                {"epochs", epochs}};
}

inline void write_trace_csv(std::ostream& out, const TrainResult& r, const std::string& comment = {}) {
    write_comment(out, comment);
    out << "epoch,theta_hat,selected_count,train_acc,dev_acc\n";
    for (const auto& e : r.epochs) {
        out << e.epoch << ',' << (e.theta_hat ? format_double(*e.theta_hat) : std::string{}) << ',' << e.selected_count << ','
            << format_double(e.train_acc) << ',' << format_double(e.dev_acc) << '\n';
    }
}

} // namespace irtcl

#endif
