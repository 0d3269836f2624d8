#pragma once

// On-disk formats.
//
//   score CSV     headerless, one unit per line, K comma-separated reals,
//                 '.' decimal point, LF line endings.
//   labels CSV    one class index per line.
//   manifest      JSON listing learners (name, score file, scale) and an
//                 optional labels file; relative paths resolve against the
//                 manifest's directory.
//   model/report  JSON documents with a mandatory "format_version".

#include <ensemblex/core.hpp>
#include <ensemblex/cvharness.hpp>
#include <ensemblex/metrics.hpp>
#include <ensemblex/synthgen.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ensemblex::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kFormatVersion = "1";

/// Probability rows in score files must sum to one within this tolerance.
inline constexpr double kFileProbTol = 1e-6;

enum class FileScale { RawScores, Probabilities };

struct LearnerEntry {
  std::string name;
  std::string scores_path;
  FileScale scale = FileScale::RawScores;
};

struct ScoreFileManifest {
  std::string version{kFormatVersion};
  std::size_t n_classes = 0;
  std::optional<std::string> labels_path;
  std::vector<LearnerEntry> learners;
};

struct LoadedScores {
  ScoreTensor scores;
  std::optional<LabelVector> labels;
  std::vector<std::string> names;
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const auto kind = fs::exists(path) ? ErrorKind::IoError : ErrorKind::MissingFile;
    throw Error(kind, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary sibling and rename so readers never see a partial file.
inline void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

/// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline double parse_double(std::string_view field, const std::string& where) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec == std::errc::result_out_of_range) {
    throw Error(ErrorKind::NonFinite, "value out of range at " + where);
  }
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorKind::ParseError, "cannot parse '" + std::string(field) + "' at " + where);
  }
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite value at " + where);
  return v;
}

/// Rows of a headerless numeric CSV; every row must have the same width.
inline std::vector<std::vector<double>> read_matrix_csv(const fs::path& path) {
  const auto text = read_text(path);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  for (auto line : split_lines(text)) {
    ++lineno;
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t col = 0;
    while (true) {
      auto comma = line.find(',', start);
      auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      ++col;
      row.push_back(parse_double(field, path.string() + ":" + std::to_string(lineno) + ":" + std::to_string(col)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::RaggedRows, path.string() + ":" + std::to_string(lineno) + " has " +
                                             std::to_string(row.size()) + " columns, expected " +
                                             std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::ParseError, path.string() + " contains no rows");
  return rows;
}

inline std::string format_matrix_csv(std::span<const double> values, std::size_t cols) {
  std::string out;
  out.reserve(values.size() * 20);
  for (std::size_t i = 0; i < values.size(); ++i) {
    append_double(out, values[i]);
    out.push_back((i + 1) % cols == 0 ? '\n' : ',');
  }
  return out;
}

inline void write_matrix_csv(const fs::path& path, std::span<const double> values, std::size_t cols) {
  write_atomic(path, format_matrix_csv(values, cols));
}

inline LabelVector read_labels_csv(const fs::path& path, std::size_t n_classes) {
  const auto text = read_text(path);
  std::vector<std::size_t> labels;
  std::size_t lineno = 0;
  for (auto line : split_lines(text)) {
    ++lineno;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw Error(ErrorKind::ParseError, "bad label at " + path.string() + ":" + std::to_string(lineno));
    }
    if (v >= n_classes) {
      throw Error(ErrorKind::ClassMismatch, "label " + std::to_string(v) + " at " + path.string() + ":" +
                                                std::to_string(lineno) + " outside [0, " +
                                                std::to_string(n_classes) + ")");
    }
    labels.push_back(v);
  }
  return LabelVector(std::move(labels), n_classes);
}

inline void write_labels_csv(const fs::path& path, const LabelVector& labels) {
  std::string out;
  for (auto y : labels.labels()) {
    out += std::to_string(y);
    out.push_back('\n');
  }
  write_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Enum spellings
// ---------------------------------------------------------------------------

inline void require_version(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw Error(ErrorKind::UnknownVersion, what + " has no format_version");
  }
  const auto& v = j.at("format_version");
  if (!v.is_string() || v.get<std::string>() != kFormatVersion) {
    throw Error(ErrorKind::UnknownVersion, what + " has unsupported format_version " + v.dump());
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw Error(ErrorKind::ParseError, what + " lacks field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, what + " field '" + key + "': " + e.what());
  }
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, what + ": " + e.what());
  }
}

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::AvgBeforeSoftmax:
    case Method::AvgAfterSoftmax: return "average";
    case Method::MajorityVote: return "majority-vote";
    case Method::Boc: return "boc";
    case Method::DiscreteSl: return "discrete-sl";
    case Method::SuperLearner: return "superlearner";
  }
  return "unknown";
}

inline std::string_view loss_name(Loss l) { return l == Loss::Nll ? "nll" : "error"; }

inline Loss parse_loss(std::string_view s) {
  if (s == "nll") return Loss::Nll;
  if (s == "error") return Loss::Error;
  throw Error(ErrorKind::InvalidInput, "unknown loss '" + std::string(s) + "'");
}

/// Scale spelling shared by the CLI and model files: "before-softmax",
/// "after-softmax" or "logit".
inline std::string_view scale_name(const FittedEnsemble& f) {
  switch (f.method) {
    case Method::AvgBeforeSoftmax: return "before-softmax";
    case Method::AvgAfterSoftmax: return "after-softmax";
    case Method::Boc: return f.combine_scale == CombineScale::BeforeSoftmax ? "before-softmax" : "after-softmax";
    case Method::SuperLearner: return f.stacking_scale == StackingScale::Score ? "before-softmax" : "logit";
    default: return "none";
  }
}

inline json constraint_to_json(const Constraint& c) {
  switch (c.kind) {
    case Constraint::Kind::Simplex: return {{"kind", "simplex"}};
    case Constraint::Kind::L1Bounded: return {{"kind", "l1"}, {"bound", c.bound}};
    case Constraint::Kind::Unconstrained: return {{"kind", "unconstrained"}};
  }
  return nullptr;
}

inline Constraint constraint_from_json(const json& j) {
  const auto kind = get_field<std::string>(j, "kind", "constraint");
  if (kind == "simplex") return Constraint::simplex();
  if (kind == "l1") return Constraint::l1(get_field<double>(j, "bound", "constraint"));
  if (kind == "unconstrained") return Constraint::unconstrained();
  throw Error(ErrorKind::ParseError, "unknown constraint kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Manifest and score loading
// ---------------------------------------------------------------------------

inline ScoreFileManifest parse_manifest(const json& j) {
  require_version(j, "manifest");
  ScoreFileManifest m;
  m.version = get_field<std::string>(j, "format_version", "manifest");
  m.n_classes = get_field<std::size_t>(j, "n_classes", "manifest");
  if (j.contains("labels_path") && !j.at("labels_path").is_null()) {
    m.labels_path = get_field<std::string>(j, "labels_path", "manifest");
  }
  const auto learners = get_field<json>(j, "learners", "manifest");
  if (!learners.is_array() || learners.empty()) {
    throw Error(ErrorKind::ParseError, "manifest needs a non-empty 'learners' array");
  }
  for (const auto& l : learners) {
    LearnerEntry e;
    e.name = get_field<std::string>(l, "name", "manifest learner");
    e.scores_path = get_field<std::string>(l, "scores_path", "manifest learner '" + e.name + "'");
    const auto scale = l.value("scale", std::string("raw_scores"));
    if (scale == "raw_scores") {
      e.scale = FileScale::RawScores;
    } else if (scale == "probabilities") {
      e.scale = FileScale::Probabilities;
    } else {
      throw Error(ErrorKind::ParseError, "learner '" + e.name + "' has unknown scale '" + scale + "'");
    }
    m.learners.push_back(std::move(e));
  }
  return m;
}

inline json manifest_to_json(const ScoreFileManifest& m) {
  json learners = json::array();
  for (const auto& l : m.learners) {
    learners.push_back({{"name", l.name},
                        {"scores_path", l.scores_path},
                        {"scale", l.scale == FileScale::RawScores ? "raw_scores" : "probabilities"}});
  }
  json j = {{"format_version", m.version}, {"n_classes", m.n_classes}, {"learners", learners}};
  j["labels_path"] = m.labels_path ? json(*m.labels_path) : json(nullptr);
  return j;
}

inline fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

/// Scores of one learner file as an N x K block. Probability files become
/// log-probabilities (floored at kProbFloor).
inline std::vector<std::vector<double>> load_learner_rows(const fs::path& path, FileScale scale,
                                                          std::size_t n_classes) {
  auto rows = read_matrix_csv(path);
  if (rows.front().size() != n_classes) {
    throw Error(ErrorKind::ClassMismatch, path.string() + " has " + std::to_string(rows.front().size()) +
                                              " columns but the manifest declares " +
                                              std::to_string(n_classes) + " classes");
  }
  if (scale == FileScale::Probabilities) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double sum = 0.0;
      for (double p : rows[i]) {
        if (p < 0.0 || p > 1.0) {
          throw Error(ErrorKind::Normalization,
                      path.string() + ":" + std::to_string(i + 1) + " holds a probability outside [0, 1]");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kFileProbTol) {
        throw Error(ErrorKind::Normalization,
                    path.string() + ":" + std::to_string(i + 1) + " sums to " + std::to_string(sum));
      }
      for (double& p : rows[i]) p = clipped_log(p);
    }
  }
  return rows;
}

inline LoadedScores load_scores(const fs::path& manifest_path) {
  const auto manifest = parse_manifest(parse_json(read_text(manifest_path), manifest_path.string()));
  const auto dir = manifest_path.parent_path();
  const auto k = manifest.n_classes;
  if (k < 2) throw Error(ErrorKind::ClassMismatch, "manifest declares fewer than two classes");

  std::vector<std::vector<std::vector<double>>> per_learner;
  LoadedScores out;
  for (const auto& l : manifest.learners) {
    per_learner.push_back(load_learner_rows(resolve(dir, l.scores_path), l.scale, k));
    out.names.push_back(l.name);
    if (per_learner.back().size() != per_learner.front().size()) {
      throw Error(ErrorKind::DimensionMismatch, "learner '" + l.name + "' has " +
                                                    std::to_string(per_learner.back().size()) +
                                                    " units, expected " +
                                                    std::to_string(per_learner.front().size()));
    }
  }
  const auto n = per_learner.front().size(), m = per_learner.size();
  std::vector<double> values;
  values.reserve(n * m * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) values.insert(values.end(), per_learner[j][i].begin(), per_learner[j][i].end());
  }
  out.scores = ScoreTensor(n, m, k, std::move(values));
  if (manifest.labels_path) {
    auto labels = read_labels_csv(resolve(dir, *manifest.labels_path), k);
    if (labels.size() != n) {
      throw Error(ErrorKind::DimensionMismatch, "labels file has " + std::to_string(labels.size()) +
                                                    " entries, expected " + std::to_string(n));
    }
    out.labels = std::move(labels);
  }
  return out;
}

/// Writes one CSV per learner plus labels and the manifest into dir.
inline void write_scores(const fs::path& dir, const ScoreTensor& scores, const std::vector<std::string>& names,
                         const LabelVector* labels) {
  ENSEMBLEX_REQUIRE(names.size() == scores.n_learners(), ErrorKind::DimensionMismatch,
                    "one name per learner required");
  ScoreFileManifest m;
  m.n_classes = scores.n_classes();
  for (std::size_t j = 0; j < scores.n_learners(); ++j) {
    auto file = names[j] + ".csv";
    write_matrix_csv(dir / file, learner_slice(scores, j).values(), scores.n_classes());
    m.learners.push_back({names[j], file, FileScale::RawScores});
  }
  if (labels) {
    write_labels_csv(dir / "labels.csv", *labels);
    m.labels_path = "labels.csv";
  }
  write_atomic(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

struct ModelFile {
  FittedEnsemble model;
  std::vector<std::string> learner_names;
};

inline json model_to_json(const ModelFile& mf) {
  const auto& f = mf.model;
  json j;
  j["format_version"] = kFormatVersion;
  j["method"] = method_name(f.method);
  j["scale"] = scale_name(f);
  j["loss"] = f.method == Method::DiscreteSl ? json(loss_name(f.loss)) : json(nullptr);
  j["learner_names"] = mf.learner_names;
  j["n_learners"] = f.n_learners;
  j["n_classes"] = f.n_classes;
  if (f.weights) {
    j["weights"] = std::vector<double>(f.weights->weights().begin(), f.weights->weights().end());
    j["constraint"] = constraint_to_json(f.weights->constraint());
  } else {
    j["weights"] = nullptr;
    j["constraint"] = nullptr;
  }
  j["selected_learner"] = f.selected_learner ? json(*f.selected_learner) : json(nullptr);
  j["fit_info"] = {{"loss_trace", f.fit_info.loss_trace},
                   {"iterations", f.fit_info.iterations},
                   {"converged", f.fit_info.converged}};
  return j;
}

inline ModelFile model_from_json(const json& j) {
  require_version(j, "model file");
  ModelFile mf;
  auto& f = mf.model;
  const auto method = get_field<std::string>(j, "method", "model");
  const auto scale = get_field<std::string>(j, "scale", "model");
  if (method == "average") {
    if (scale == "before-softmax") {
      f.method = Method::AvgBeforeSoftmax;
      f.combine_scale = CombineScale::BeforeSoftmax;
    } else if (scale == "after-softmax") {
      f.method = Method::AvgAfterSoftmax;
      f.combine_scale = CombineScale::AfterSoftmax;
    } else {
      throw Error(ErrorKind::ParseError, "average model with scale '" + scale + "'");
    }
  } else if (method == "majority-vote") {
    f.method = Method::MajorityVote;
  } else if (method == "boc") {
    f.method = Method::Boc;
    if (scale != "before-softmax" && scale != "after-softmax") {
      throw Error(ErrorKind::ParseError, "BOC model with scale '" + scale + "'");
    }
    f.combine_scale = scale == "before-softmax" ? CombineScale::BeforeSoftmax : CombineScale::AfterSoftmax;
  } else if (method == "discrete-sl") {
    f.method = Method::DiscreteSl;
    f.loss = parse_loss(get_field<std::string>(j, "loss", "model"));
  } else if (method == "superlearner") {
    f.method = Method::SuperLearner;
    if (scale != "before-softmax" && scale != "logit") {
      throw Error(ErrorKind::ParseError, "Super Learner model with scale '" + scale + "'");
    }
    f.stacking_scale = scale == "logit" ? StackingScale::Logit : StackingScale::Score;
  } else {
    throw Error(ErrorKind::ParseError, "unknown method '" + method + "'");
  }
  mf.learner_names = get_field<std::vector<std::string>>(j, "learner_names", "model");
  f.n_learners = get_field<std::size_t>(j, "n_learners", "model");
  f.n_classes = get_field<std::size_t>(j, "n_classes", "model");
  if (j.contains("weights") && !j.at("weights").is_null()) {
    f.weights = WeightVector(get_field<std::vector<double>>(j, "weights", "model"),
                             constraint_from_json(get_field<json>(j, "constraint", "model")));
  }
  if (j.contains("selected_learner") && !j.at("selected_learner").is_null()) {
    f.selected_learner = get_field<std::size_t>(j, "selected_learner", "model");
  }
  if (j.contains("fit_info")) {
    const auto& fi = j.at("fit_info");
    f.fit_info.loss_trace = get_field<std::vector<double>>(fi, "loss_trace", "fit_info");
    f.fit_info.iterations = get_field<std::size_t>(fi, "iterations", "fit_info");
    f.fit_info.converged = get_field<bool>(fi, "converged", "fit_info");
  }
  if ((f.method == Method::SuperLearner || f.method == Method::Boc) && !f.weights) {
    throw Error(ErrorKind::ParseError, "model of method '" + method + "' lacks weights");
  }
  if (f.method == Method::DiscreteSl && !f.selected_learner) {
    throw Error(ErrorKind::ParseError, "discrete Super Learner model lacks selected_learner");
  }
  if (mf.learner_names.size() != f.n_learners) {
    throw Error(ErrorKind::ParseError, "model learner_names length differs from n_learners");
  }
  return mf;
}

inline std::string dump_model(const ModelFile& mf) { return model_to_json(mf).dump(2) + "\n"; }

inline void save_model(const fs::path& path, const ModelFile& mf) { write_atomic(path, dump_model(mf)); }

inline ModelFile load_model(const fs::path& path) {
  return model_from_json(parse_json(read_text(path), path.string()));
}

/// Rejects scores whose learner names differ from the names the model was fitted on.
inline void check_learner_names(const ModelFile& mf, const std::vector<std::string>& names) {
  if (mf.learner_names != names) {
    std::string got, want;
    for (const auto& n : names) got += (got.empty() ? "" : ",") + n;
    for (const auto& n : mf.learner_names) want += (want.empty() ? "" : ",") + n;
    throw Error(ErrorKind::NameMismatch, "manifest learners [" + got + "] differ from model learners [" + want + "]");
  }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json report_to_json(const EvalReport& r) {
  json per_class = json::array();
  for (double v : r.per_class_accuracy) per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
  json j;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["mean_cross_entropy"] = r.mean_cross_entropy ? json(*r.mean_cross_entropy) : json(nullptr);
  j["per_class_accuracy"] = per_class;
  j["confusion"] = r.confusion;
  return j;
}

inline json report_document(const EvalReport& r) {
  json j = report_to_json(r);
  j["format_version"] = kFormatVersion;
  return j;
}

inline json comparison_to_json(const Comparison& c, const std::vector<std::string>& names) {
  json methods = json::array();
  for (const auto& row : c.rows) {
    json m = {{"key", row.key}, {"label", row.label}, {"report", report_to_json(row.report)}};
    if (row.model.weights) {
      m["weights"] = std::vector<double>(row.model.weights->weights().begin(), row.model.weights->weights().end());
    }
    if (row.model.selected_learner) m["selected_learner"] = *row.model.selected_learner;
    methods.push_back(std::move(m));
  }
  return {{"format_version", kFormatVersion},
          {"learner_names", names},
          {"learner_validation_nll", c.learner_val_nll},
          {"superlearner_validation_risk", c.sl_val_risk},
          {"methods", methods}};
}

/// Fixed-width text rendering of a comparison.
inline std::string comparison_table(const Comparison& c) {
  std::size_t width = 6;
  for (const auto& r : c.rows) width = std::max(width, r.label.size());
  std::string out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  char buf[64];
  out += pad("Method", width) + "  Accuracy  Cross-entropy\n";
  out += std::string(width + 25, '-') + "\n";
  for (const auto& r : c.rows) {
    std::snprintf(buf, sizeof buf, "  %8.4f", r.report.accuracy);
    out += pad(r.label, width) + buf;
    if (r.report.mean_cross_entropy) {
      std::snprintf(buf, sizeof buf, "  %13.4f", *r.report.mean_cross_entropy);
      out += buf;
    } else {
      out += "              -";
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator specs
// ---------------------------------------------------------------------------

struct SynthFile {
  GenSpec spec;
  std::size_t n_test_units = 0;
  std::vector<std::string> names;
};

inline SynthFile synth_from_json(const json& j) {
  require_version(j, "generator spec");
  SynthFile sf;
  auto& g = sf.spec;
  g.n_units = get_field<std::size_t>(j, "n_units", "generator spec");
  g.n_classes = j.value("n_classes", g.n_classes);
  g.n_features = j.value("n_features", g.n_features);
  g.separation = j.value("separation", g.separation);
  g.weak_noise_sd = j.value("weak_noise_sd", g.weak_noise_sd);
  g.correlated_noise_sd = j.value("correlated_noise_sd", g.correlated_noise_sd);
  g.seed = j.value("seed", g.seed);
  sf.n_test_units = j.value("n_test_units", std::size_t{0});
  if (j.contains("class_means")) g.class_means = get_field<std::vector<std::vector<double>>>(j, "class_means", "generator spec");
  const auto labels = j.value("labels", std::string("posterior"));
  if (labels == "posterior") {
    g.labels = GenSpec::Labels::Posterior;
  } else if (labels == "bayes_argmax") {
    g.labels = GenSpec::Labels::BayesArgmax;
  } else {
    throw Error(ErrorKind::ParseError, "unknown labels mode '" + labels + "'");
  }
  const auto learners = get_field<json>(j, "learners", "generator spec");
  if (!learners.is_array()) throw Error(ErrorKind::ParseError, "'learners' must be an array");
  for (const auto& l : learners) {
    const auto kind = get_field<std::string>(l, "kind", "learner spec");
    LearnerSpec s;
    if (kind == "bayes_oracle") {
      s = LearnerSpec::bayes_oracle();
    } else if (kind == "noisy") {
      s = LearnerSpec::noisy(get_field<double>(l, "noise_sd", "noisy learner"));
    } else if (kind == "over_confident") {
      s = LearnerSpec::over_confident(get_field<double>(l, "temperature", "over_confident learner"),
                                      l.value("noise_sd", 0.0));
    } else if (kind == "weak") {
      s = LearnerSpec::weak(get_field<double>(l, "signal_shrink", "weak learner"));
    } else if (kind == "correlated_with") {
      s = LearnerSpec::correlated_with(get_field<std::size_t>(l, "base", "correlated_with learner"),
                                       get_field<double>(l, "mix", "correlated_with learner"));
    } else {
      throw Error(ErrorKind::ParseError, "unknown learner kind '" + kind + "'");
    }
    const auto idx = g.learners.size();
    sf.names.push_back(l.value("name", "learner" + std::to_string(idx) + "_" + kind));
    g.learners.push_back(s);
  }
  g.validate();
  return sf;
}

}  // namespace ensemblex::io
