#pragma once

// Synthetic case generator. Each disease owns a random subset of a shared
// symptom pool with a decreasing probability schedule; a case picks a
// disease from the priors, runs an independent Bernoulli trial per profile
// symptom and splits the drawn symptoms into explicit and implicit halves.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nsc/data/case.hpp"
#include "nsc/data/io.hpp"
#include "nsc/error.hpp"
#include "nsc/numkit/random.hpp"

namespace nsc {

struct GeneratorShape {
  std::size_t min_symptoms_per_disease = 4;
  std::size_t max_symptoms_per_disease = 12;
  double first_prob_lo = 0.7, first_prob_hi = 0.95;
  double last_prob_lo = 0.1, last_prob_hi = 0.2;
  std::size_t min_symptoms_per_case = 2;

  double mean_symptoms_per_disease() const {
    return 0.5 * static_cast<double>(min_symptoms_per_disease + max_symptoms_per_disease);
  }
};

namespace detail {

inline std::string padded_name(const char* prefix, std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  std::ostringstream os;
  os << prefix << std::setw(std::max(width, 3)) << std::setfill('0') << i;
  return os.str();
}

enum : std::uint64_t { kProfileStream = 0x9F0F, kTrainStream = 1, kValStream = 2, kTestStream = 3 };

}  // namespace detail

inline std::string synthetic_symptom_name(std::size_t i, std::size_t n) { return detail::padded_name("symptom_", i, n); }
inline std::string synthetic_disease_name(std::size_t i, std::size_t n) { return detail::padded_name("disease_", i, n); }

/// Seeded disease profiles with uniform priors.
inline std::vector<DiseaseProfile> generate_profiles(std::size_t num_diseases, std::size_t num_symptoms,
                                                     std::uint64_t seed, const GeneratorShape& shape = {}) {
  if (num_diseases < 1) throw ConfigError("need at least one disease");
  const double needed = 3.0 * shape.mean_symptoms_per_disease();
  if (static_cast<double>(num_symptoms) < needed || num_symptoms < shape.max_symptoms_per_disease)
    throw ConfigError("infeasible world: " + std::to_string(num_symptoms) + " symptoms, need at least " +
                      std::to_string(static_cast<std::size_t>(needed)));
  std::vector<DiseaseProfile> profiles;
  profiles.reserve(num_diseases);
  const std::size_t span = shape.max_symptoms_per_disease - shape.min_symptoms_per_disease + 1;
  std::vector<std::size_t> pool(num_symptoms);
  for (std::size_t d = 0; d < num_diseases; ++d) {
    numkit::Rng rng(numkit::derive_seed(seed, {detail::kProfileStream, d}));
    const std::size_t k = shape.min_symptoms_per_disease + rng.below(span);
    for (std::size_t i = 0; i < num_symptoms; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(num_symptoms - i)]);
    const double first = rng.uniform(shape.first_prob_lo, shape.first_prob_hi);
    const double last = rng.uniform(shape.last_prob_lo, shape.last_prob_hi);
    std::vector<std::pair<std::size_t, double>> chosen;
    for (std::size_t i = 0; i < k; ++i)
      chosen.emplace_back(pool[i], first + (last - first) * static_cast<double>(i) / static_cast<double>(k - 1));
    std::sort(chosen.begin(), chosen.end());
    DiseaseProfile p;
    p.disease = synthetic_disease_name(d, num_diseases);
    p.prior = 1.0 / static_cast<double>(num_diseases);
    for (auto [id, prob] : chosen) p.symptom_probs.emplace_back(synthetic_symptom_name(id, num_symptoms), prob);
    profiles.push_back(std::move(p));
  }
  return profiles;
}

/// Checks the profile invariants the sampler relies on.
inline void validate_profiles(const std::vector<DiseaseProfile>& profiles) {
  if (profiles.empty()) throw ConfigError("no disease profiles");
  double total = 0.0;
  for (const auto& p : profiles) {
    if (!(p.prior >= 0.0)) throw ConfigError(p.disease + ": negative prior");
    total += p.prior;
    if (p.symptom_probs.empty()) throw ConfigError(p.disease + ": no symptoms");
    bool strong = false;
    for (const auto& [s, v] : p.symptom_probs) {
      if (!(v > 0.0 && v <= 1.0)) throw ConfigError(p.disease + ": probability of " + s + " outside (0,1]");
      strong |= v >= 0.5;
    }
    if (!strong) throw ConfigError(p.disease + ": needs a symptom with probability >= 0.5");
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("priors do not sum to 1");
}

/// Draws one case. The whole case is redrawn until it carries at least
/// min(2, profile size) symptoms.
inline CaseRecord sample_case(const std::vector<DiseaseProfile>& profiles, std::uint64_t seed,
                              const GeneratorShape& shape = {}) {
  numkit::Rng rng(seed);
  double total = 0.0;
  for (const auto& p : profiles) total += p.prior;
  for (std::size_t attempt = 0; attempt < 100000; ++attempt) {
    double u = rng.uniform() * total;
    std::size_t d = 0;
    while (d + 1 < profiles.size() && u >= profiles[d].prior) u -= profiles[d++].prior;
    const auto& prof = profiles[d];
    std::vector<std::string> drawn;
    for (const auto& [s, p] : prof.symptom_probs)
      if (rng.bernoulli(p)) drawn.push_back(s);
    if (drawn.size() < std::min(shape.min_symptoms_per_case, prof.symptom_probs.size())) continue;
    rng.shuffle(std::span<std::string>(drawn));
    const std::size_t n_explicit = (drawn.size() + 1) / 2;
    CaseRecord c;
    c.disease = prof.disease;
    c.explicit_symptoms.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(n_explicit));
    for (std::size_t i = n_explicit; i < drawn.size(); ++i) c.implicit_symptoms.emplace_back(drawn[i], true);
    return c;
  }
  throw Error("sample_case: could not draw enough symptoms");
}

/// Vocabulary of every symptom and disease named by the profiles.
inline Vocabulary profile_vocabulary(const std::vector<DiseaseProfile>& profiles) {
  std::set<std::string> symptoms, diseases;
  for (const auto& p : profiles) {
    diseases.insert(p.disease);
    for (const auto& [s, v] : p.symptom_probs) symptoms.insert(s);
  }
  return {NameIndex::from_set(symptoms), NameIndex::from_set(diseases)};
}

/// Samples the three splits. Case i of split k uses the seed derived from
/// (seed, k, i), so any case can be regenerated on its own.
inline DatasetSplit generate_dataset(const std::vector<DiseaseProfile>& profiles, std::size_t n_train,
                                     std::size_t n_val, std::size_t n_test, std::uint64_t seed,
                                     const GeneratorShape& shape = {}) {
  if (n_train < 1 || n_val < 1 || n_test < 1) throw ConfigError("split sizes must be >= 1");
  validate_profiles(profiles);
  DatasetSplit split;
  auto fill = [&](std::vector<CaseRecord>& out, std::size_t n, std::uint64_t stream) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_case(profiles, numkit::derive_seed(seed, {stream, i}), shape));
  };
  fill(split.train, n_train, detail::kTrainStream);
  fill(split.validation, n_val, detail::kValStream);
  fill(split.test, n_test, detail::kTestStream);
  split.vocab = profile_vocabulary(profiles);
  return split;
}

/// Dataset-level counts in the shape of the usual statistics table.
struct DatasetStatistics {
  std::size_t total = 0, train = 0, validation = 0, test = 0;
  std::size_t unique_diagnoses = 0, unique_symptoms = 0;
  double mean_explicit = 0.0, mean_implicit = 0.0;
};

inline DatasetStatistics dataset_statistics(const DatasetSplit& split) {
  DatasetStatistics st;
  st.train = split.train.size();
  st.validation = split.validation.size();
  st.test = split.test.size();
  st.total = split.total();
  std::set<std::string> d, s;
  double ex = 0, im = 0;
  for (const auto* set : {&split.train, &split.validation, &split.test})
    for (const auto& c : *set) {
      d.insert(c.disease);
      s.insert(c.explicit_symptoms.begin(), c.explicit_symptoms.end());
      for (const auto& [n, f] : c.implicit_symptoms) s.insert(n);
      ex += static_cast<double>(c.explicit_symptoms.size());
      im += static_cast<double>(c.implicit_symptoms.size());
    }
  st.unique_diagnoses = d.size();
  st.unique_symptoms = s.size();
  if (st.total) {
    st.mean_explicit = ex / static_cast<double>(st.total);
    st.mean_implicit = im / static_cast<double>(st.total);
  }
  return st;
}

inline std::string format_statistics(const DatasetStatistics& st) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "Total dialogues\t" << st.total << "\n"
     << "Training dialogues\t" << st.train << "\n"
     << "Validation dialogues\t" << st.validation << "\n"
     << "Testing dialogues\t" << st.test << "\n"
     << "Unique diagnoses\t" << st.unique_diagnoses << "\n"
     << "Unique symptoms\t" << st.unique_symptoms << "\n"
     << "Average number of explicit symptoms\t" << st.mean_explicit << "\n"
     << "Average number of implicit symptoms\t" << st.mean_implicit << "\n";
  return os.str();
}

/// Writes profiles.jsonl, vocab.json, train/val/test.jsonl and stats.tsv.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<DiseaseProfile>& profiles,
                          const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_profiles(dir / "profiles.jsonl", profiles);
  write_vocabulary(dir / "vocab.json", split.vocab);
  write_cases(dir / "train.jsonl", split.train);
  write_cases(dir / "val.jsonl", split.validation);
  write_cases(dir / "test.jsonl", split.test);
  detail::write_text_atomically(dir / "stats.tsv", format_statistics(dataset_statistics(split)));
}

}  // namespace nsc
