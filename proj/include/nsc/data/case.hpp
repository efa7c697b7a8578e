#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nsc/error.hpp"
#include "nsc/model/known_state.hpp"
#include "nsc/model/vocabulary.hpp"

namespace nsc {

/// One diagnostic case as stored on disk.
struct CaseRecord {
  std::string disease;
  std::vector<std::string> explicit_symptoms;
  std::vector<std::pair<std::string, bool>> implicit_symptoms;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

/// Checks the structural invariants: explicit symptoms present and no symptom
/// mentioned twice.
inline void validate_case(const CaseRecord& c) {
  if (c.disease.empty()) throw Error("case has an empty disease name");
  if (c.explicit_symptoms.empty()) throw Error("case has no explicit symptoms");
  std::set<std::string> seen;
  for (const auto& s : c.explicit_symptoms)
    if (!seen.insert(s).second) throw Error("symptom '" + s + "' appears twice in a case");
  for (const auto& [s, flag] : c.implicit_symptoms)
    if (!seen.insert(s).second) throw Error("symptom '" + s + "' appears twice in a case");
}

/// A case resolved against a vocabulary.
struct EncodedCase {
  std::size_t disease = 0;
  std::vector<std::size_t> explicit_ids;
  std::vector<std::pair<std::size_t, bool>> implicit_ids;

  /// Present symptoms the patient did not volunteer.
  std::vector<std::size_t> implicit_present() const {
    std::vector<std::size_t> out;
    for (auto [id, flag] : implicit_ids)
      if (flag) out.push_back(id);
    return out;
  }

  /// Closed-world answer vector: 1 for explicit and implicit-present
  /// symptoms, 0 for everything else.
  std::vector<std::uint8_t> answers(std::size_t num_symptoms) const {
    std::vector<std::uint8_t> a(num_symptoms, 0);
    for (auto id : explicit_ids) a[id] = 1;
    for (auto [id, flag] : implicit_ids)
      if (flag) a[id] = 1;
    return a;
  }

  KnownState explicit_state(std::size_t num_symptoms) const {
    KnownState st(num_symptoms);
    for (auto id : explicit_ids) st.reveal(id, true);
    return st;
  }

  /// Explicit plus every implicit finding.
  KnownState full_state(std::size_t num_symptoms) const {
    KnownState st = explicit_state(num_symptoms);
    for (auto [id, flag] : implicit_ids) st.reveal(id, flag);
    return st;
  }
};

inline EncodedCase encode_case(const CaseRecord& c, const Vocabulary& vocab) {
  EncodedCase e;
  e.disease = vocab.diseases.id(c.disease);
  for (const auto& s : c.explicit_symptoms) e.explicit_ids.push_back(vocab.symptoms.id(s));
  for (const auto& [s, flag] : c.implicit_symptoms) e.implicit_ids.emplace_back(vocab.symptoms.id(s), flag);
  return e;
}

inline std::vector<EncodedCase> encode_cases(const std::vector<CaseRecord>& cases, const Vocabulary& vocab) {
  std::vector<EncodedCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(encode_case(c, vocab));
  return out;
}

/// Conditional symptom probabilities of one disease for the generator.
struct DiseaseProfile {
  std::string disease;
  double prior = 0.0;
  /// (symptom name, probability in (0,1]), in the order they are sampled.
  std::vector<std::pair<std::string, double>> symptom_probs;

  friend bool operator==(const DiseaseProfile&, const DiseaseProfile&) = default;
};

struct DatasetSplit {
  std::vector<CaseRecord> train;
  std::vector<CaseRecord> validation;
  std::vector<CaseRecord> test;
  Vocabulary vocab;

  std::size_t total() const { return train.size() + validation.size() + test.size(); }
};

/// Vocabulary built from the names that occur in the given records.
inline Vocabulary vocabulary_from_cases(std::initializer_list<const std::vector<CaseRecord>*> sets) {
  std::set<std::string> symptoms, diseases;
  for (const auto* set : sets)
    for (const auto& c : *set) {
      diseases.insert(c.disease);
      symptoms.insert(c.explicit_symptoms.begin(), c.explicit_symptoms.end());
      for (const auto& [s, f] : c.implicit_symptoms) symptoms.insert(s);
    }
  return {NameIndex::from_set(symptoms), NameIndex::from_set(diseases)};
}

}  // namespace nsc
