#pragma once

// Line-delimited files: a "#nsc-data v1" header line, then one JSON document
// per line.
//   cases:    {"disease": str, "explicit": [str], "implicit": [[str, bool]]}
//   profiles: {"disease": str, "prior": num, "symptom_probs": {str: num}}
// A dataset directory holds train.jsonl, val.jsonl, test.jsonl and an
// optional vocab.json ({"symptoms": [...], "diseases": [...]}).

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsc/data/case.hpp"
#include "nsc/error.hpp"

namespace nsc {

inline constexpr const char* kDataHeader = "#nsc-data v1";

namespace detail {

template <typename Fn>
void read_lines(const std::filesystem::path& path, Fn&& on_doc) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line != kDataHeader)
        throw ParseError(lineno, path.string() + ": missing '" + std::string(kDataHeader) + "' header");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("malformed document: ") + e.what());
    }
    try {
      on_doc(doc, lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad field: ") + e.what());
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (!header) throw ParseError(0, path.string() + ": empty file");
}

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline nlohmann::json case_to_json(const CaseRecord& c) {
  auto implicit = nlohmann::json::array();
  for (const auto& [s, f] : c.implicit_symptoms) implicit.push_back({s, f});
  return {{"disease", c.disease}, {"explicit", c.explicit_symptoms}, {"implicit", implicit}};
}

inline CaseRecord case_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  CaseRecord c;
  c.disease = j.at("disease").get<std::string>();
  c.explicit_symptoms = j.at("explicit").get<std::vector<std::string>>();
  for (const auto& item : j.at("implicit")) {
    if (!item.is_array() || item.size() != 2) throw Error("implicit entries must be [name, bool] pairs");
    c.implicit_symptoms.emplace_back(item.at(0).get<std::string>(), item.at(1).get<bool>());
  }
  validate_case(c);
  return c;
}

inline std::string format_cases(const std::vector<CaseRecord>& cases) {
  std::string out = std::string(kDataHeader) + "\n";
  for (const auto& c : cases) out += case_to_json(c).dump() + "\n";
  return out;
}

inline void write_cases(const std::filesystem::path& path, const std::vector<CaseRecord>& cases) {
  detail::write_text_atomically(path, format_cases(cases));
}

inline std::vector<CaseRecord> read_cases(const std::filesystem::path& path, const Vocabulary* vocab = nullptr) {
  std::vector<CaseRecord> cases;
  detail::read_lines(path, [&](const nlohmann::json& doc, std::size_t) {
    auto c = case_from_json(doc);
    if (vocab) encode_case(c, *vocab);
    cases.push_back(std::move(c));
  });
  return cases;
}

inline nlohmann::json vocabulary_to_json(const Vocabulary& v) {
  return {{"symptoms", v.symptoms.names()}, {"diseases", v.diseases.names()}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  return {NameIndex(j.at("symptoms").get<std::vector<std::string>>()),
          NameIndex(j.at("diseases").get<std::vector<std::string>>())};
}

inline void write_vocabulary(const std::filesystem::path& path, const Vocabulary& v) {
  detail::write_text_atomically(path, vocabulary_to_json(v).dump(1) + "\n");
}

inline Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return vocabulary_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

/// Loads a dataset directory (train.jsonl required; val.jsonl, test.jsonl
/// and vocab.json optional) or a single record file, which becomes the
/// training split. Without a supplied vocabulary, vocab.json is used when
/// present, otherwise one is built from the records.
inline DatasetSplit load_cases(const std::filesystem::path& path, std::optional<Vocabulary> vocab = std::nullopt) {
  namespace fs = std::filesystem;
  DatasetSplit split;
  if (!vocab && fs::is_directory(path) && fs::exists(path / "vocab.json")) vocab = read_vocabulary(path / "vocab.json");
  const Vocabulary* v = vocab ? &*vocab : nullptr;
  if (fs::is_directory(path)) {
    split.train = read_cases(path / "train.jsonl", v);
    if (fs::exists(path / "val.jsonl")) split.validation = read_cases(path / "val.jsonl", v);
    if (fs::exists(path / "test.jsonl")) split.test = read_cases(path / "test.jsonl", v);
  } else {
    split.train = read_cases(path, v);
  }
  split.vocab = vocab ? std::move(*vocab) : vocabulary_from_cases({&split.train, &split.validation, &split.test});
  return split;
}

inline nlohmann::json profile_to_json(const DiseaseProfile& p) {
  nlohmann::json probs = nlohmann::json::object();
  for (const auto& [s, v] : p.symptom_probs) probs[s] = v;
  return {{"disease", p.disease}, {"prior", p.prior}, {"symptom_probs", probs}};
}

inline void write_profiles(const std::filesystem::path& path, const std::vector<DiseaseProfile>& profiles) {
  std::string out = std::string(kDataHeader) + "\n";
  for (const auto& p : profiles) out += profile_to_json(p).dump() + "\n";
  detail::write_text_atomically(path, out);
}

/// Symptom probabilities come back sorted by symptom name.
inline std::vector<DiseaseProfile> read_profiles(const std::filesystem::path& path) {
  std::vector<DiseaseProfile> profiles;
  detail::read_lines(path, [&](const nlohmann::json& doc, std::size_t) {
    DiseaseProfile p;
    p.disease = doc.at("disease").get<std::string>();
    p.prior = doc.at("prior").get<double>();
    for (const auto& [k, v] : doc.at("symptom_probs").items()) p.symptom_probs.emplace_back(k, v.get<double>());
    profiles.push_back(std::move(p));
  });
  return profiles;
}

}  // namespace nsc
