#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "medtpe/errors.hpp"

namespace medtpe {

// Deterministic flowsheet-style corpus: every line is one record holding a
// station id followed by alternating measurements and two-word clinical
// terms. Term ranks follow a Zipf–Mandelbrot law (heavy head, long tail),
// which yields the saturating compression-vs-budget curve the evaluation
// expects, while values and station ids keep every term's neighborhood
// high-entropy so no run longer than two tokens recurs often enough to
// matter.
struct SynthConfig {
  std::uint64_t seed = 42;
  std::uint64_t target_bytes = 10'000'000;
  unsigned min_terms = 5;   // terms per record
  unsigned max_terms = 10;
};

namespace synth_detail {

inline constexpr std::array<std::string_view, 144> kModifiers = {
    "acute",         "chronic",       "severe",        "mild",
    "moderate",      "bilateral",     "unilateral",    "proximal",
    "distal",        "anterior",      "posterior",     "lateral",
    "medial",        "superior",      "inferior",      "diffuse",
    "focal",         "localized",     "generalized",   "progressive",
    "recurrent",     "persistent",    "transient",     "intermittent",
    "stable",        "unstable",      "elevated",      "reduced",
    "impaired",      "abnormal",      "cardiac",       "pulmonary",
    "hepatic",       "renal",         "gastric",       "intestinal",
    "colonic",       "esophageal",    "pancreatic",    "splenic",
    "adrenal",       "thyroid",       "pituitary",     "cerebral",
    "spinal",        "femoral",       "tibial",        "radial",
    "ulnar",         "carotid",       "aortic",        "mitral",
    "tricuspid",     "venous",        "arterial",      "capillary",
    "lymphatic",     "pleural",       "pericardial",   "peritoneal",
    "bronchial",     "tracheal",      "laryngeal",     "nasal",
    "ocular",        "retinal",       "corneal",       "dermal",
    "cutaneous",     "subcutaneous",  "muscular",      "skeletal",
    "vertebral",     "cranial",       "facial",        "mandibular",
    "clavicular",    "scapular",      "humeral",       "pelvic",
    "sacral",        "lumbar",        "thoracic",      "cervical",
    "inguinal",      "axillary",      "popliteal",     "plantar",
    "palmar",        "digital",       "ischemic",      "embolic",
    "thrombotic",    "stenotic",      "aneurysmal",    "varicose",
    "atrophic",      "hypertrophic",  "dysplastic",    "neoplastic",
    "metastatic",    "benign",        "malignant",     "infectious",
    "septic",        "febrile",       "afebrile",      "hypoxic",
    "anemic",        "icteric",       "edematous",     "cyanotic",
    "diaphoretic",   "tachycardic",   "bradycardic",   "hypertensive",
    "hypotensive",   "hyperglycemic", "hypoglycemic",  "azotemic",
    "acidotic",      "alkalotic",     "hypokalemic",   "hyperkalemic",
    "hyponatremic",  "hypernatremic", "neuropathic",   "myopathic",
    "arthritic",     "osteopenic",    "osteoporotic",  "emphysematous",
    "asthmatic",     "bronchitic",    "fibrotic",      "cirrhotic",
    "nephrotic",     "uremic",        "anginal",       "arrhythmic",
    "syncopal",      "vertiginous",   "migrainous",    "epileptic",
};

inline constexpr std::array<std::string_view, 144> kFindings = {
    "pain",           "tenderness",    "swelling",      "edema",
    "effusion",       "erythema",      "rash",          "lesion",
    "ulcer",          "mass",          "nodule",        "cyst",
    "polyp",          "tumor",         "stenosis",      "occlusion",
    "thrombosis",     "embolism",      "aneurysm",      "dissection",
    "rupture",        "perforation",   "obstruction",   "ileus",
    "distension",     "hernia",        "prolapse",      "stricture",
    "fistula",        "abscess",       "cellulitis",    "dermatitis",
    "pruritus",       "urticaria",     "ecchymosis",    "petechiae",
    "purpura",        "hemorrhage",    "hematoma",      "epistaxis",
    "hemoptysis",     "hematemesis",   "melena",        "hematuria",
    "proteinuria",    "oliguria",      "polyuria",      "dysuria",
    "incontinence",   "retention",     "constipation",  "diarrhea",
    "nausea",         "vomiting",      "dyspepsia",     "dysphagia",
    "odynophagia",    "anorexia",      "cachexia",      "fatigue",
    "malaise",        "weakness",      "paresis",       "paralysis",
    "paresthesia",    "neuralgia",     "myalgia",       "arthralgia",
    "stiffness",      "spasm",         "tremor",        "ataxia",
    "dysarthria",     "aphasia",       "dysphonia",     "tinnitus",
    "vertigo",        "syncope",       "seizure",       "confusion",
    "delirium",       "dementia",      "insomnia",      "somnolence",
    "lethargy",       "agitation",     "anxiety",       "depression",
    "psychosis",      "hallucination", "dyspnea",       "orthopnea",
    "tachypnea",      "bradypnea",     "apnea",         "wheezing",
    "stridor",        "rhonchi",       "rales",         "cough",
    "congestion",     "rhinorrhea",    "pharyngitis",   "tonsillitis",
    "sinusitis",      "otitis",        "conjunctivitis","blepharitis",
    "keratitis",      "uveitis",       "glaucoma",      "cataract",
    "diplopia",       "photophobia",   "nystagmus",     "palpitation",
    "murmur",         "gallop",        "bruit",         "claudication",
    "cyanosis",       "pallor",        "jaundice",      "diaphoresis",
    "fever",          "chills",        "rigors",        "hypothermia",
    "hyperthermia",   "dehydration",   "hypovolemia",   "hypervolemia",
    "lymphadenopathy","splenomegaly",  "hepatomegaly",  "ascites",
    "peritonitis",    "pancreatitis",  "cholecystitis", "hepatitis",
    "gastritis",      "esophagitis",   "colitis",       "enteritis",
};

inline constexpr std::string_view kConsonants = "bcdfghjklmnpqrstvwxz";
inline constexpr std::string_view kVowels = "aeiou";

class Sampler {
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t bounded(std::uint64_t n) { return rng_() % n; }

  double uniform01() {
    return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
  }

private:
  std::mt19937_64 rng_;
};

}  // namespace synth_detail

class SynthCorpusGenerator {
public:
  explicit SynthCorpusGenerator(const SynthConfig& cfg)
      : cfg_(cfg), sampler_(cfg.seed) {
    if (cfg_.min_terms < 1 || cfg_.max_terms < cfg_.min_terms) {
      throw config_error("term-per-record bounds are inconsistent");
    }
    build_station_pools();
    build_value_pool();
    build_term_weights();
  }

  std::vector<std::string> generate() {
    std::vector<std::string> docs;
    std::uint64_t bytes = 0;
    while (bytes < cfg_.target_bytes) {
      docs.push_back(make_record());
      bytes += docs.back().size() + 1;  // newline on disk
    }
    return docs;
  }

private:
  // Station ids pair a pronounceable prefix with a digit-led suffix; the
  // pairing is near-unique per record, so id fragments never form frequent
  // n-grams, while shared prefixes/suffixes give the tokenizer trainer a
  // large mid-frequency vocabulary to learn (and later offer for eviction).
  void build_station_pools() {
    using namespace synth_detail;
    prefixes_.reserve(1800);
    for (std::size_t i = 0; i < 1800; ++i) {
      std::string p;
      p += kConsonants[sampler_.bounded(kConsonants.size())];
      p += kVowels[sampler_.bounded(kVowels.size())];
      p += kConsonants[sampler_.bounded(kConsonants.size())];
      p += kVowels[sampler_.bounded(kVowels.size())];
      prefixes_.push_back(std::move(p));
    }
    suffixes_.reserve(1500);
    for (std::size_t i = 0; i < 1500; ++i) {
      std::string s;
      s += static_cast<char>('0' + sampler_.bounded(10));
      s += kConsonants[sampler_.bounded(kConsonants.size())];
      s += kConsonants[sampler_.bounded(kConsonants.size())];
      suffixes_.push_back(std::move(s));
    }
  }

  // ~1200 distinct measurement strings drawn uniformly: frequent enough to
  // become single tokens, numerous enough that any (value, term-word) run is
  // too rare to mine.
  void build_value_pool() {
    values_.reserve(1200);
    for (int whole = 0; whole < 100; ++whole) {
      for (int tenth = 0; tenth < 10; ++tenth) {
        values_.push_back(std::to_string(whole) + "." + std::to_string(tenth));
      }
    }
    for (int v = 100; v < 300; ++v) {
      values_.push_back(std::to_string(v));
    }
  }

  // Zipf–Mandelbrot weights over the modifier×finding term space, with the
  // rank-to-pair assignment scrambled so the head is not clustered on one
  // modifier. The shift q flattens head-vs-tail ratios enough that budget
  // growth keeps paying out while still saturating.
  void build_term_weights() {
    using namespace synth_detail;
    const std::size_t k = kModifiers.size() * kFindings.size();
    cumulative_.resize(k);
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      total += 1.0 / (static_cast<double>(r) + 1.0 + 50.0);
      cumulative_[r] = total;
    }
    for (double& c : cumulative_) c /= total;
  }

  std::size_t sample_term_rank() {
    const double u = sampler_.uniform01();
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] < u) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  void append_term(std::string& out, std::size_t rank) {
    using namespace synth_detail;
    const std::size_t k = kModifiers.size() * kFindings.size();
    const std::size_t mixed = (rank * 9973 + 7) % k;
    out += kModifiers[mixed / kFindings.size()];
    out += ' ';
    out += kFindings[mixed % kFindings.size()];
  }

  std::string make_record() {
    std::string line;
    line.reserve(256);
    line += prefixes_[sampler_.bounded(prefixes_.size())];
    line += suffixes_[sampler_.bounded(suffixes_.size())];
    const unsigned terms =
        cfg_.min_terms +
        static_cast<unsigned>(sampler_.bounded(cfg_.max_terms - cfg_.min_terms + 1));
    for (unsigned t = 0; t < terms; ++t) {
      line += ' ';
      line += values_[sampler_.bounded(values_.size())];
      line += ' ';
      append_term(line, sample_term_rank());
    }
    line += ' ';
    line += values_[sampler_.bounded(values_.size())];
    return line;
  }

  SynthConfig cfg_;
  synth_detail::Sampler sampler_;
  std::vector<std::string> prefixes_;
  std::vector<std::string> suffixes_;
  std::vector<std::string> values_;
  std::vector<double> cumulative_;
};

inline std::vector<std::string> generate_corpus(const SynthConfig& cfg) {
  return SynthCorpusGenerator(cfg).generate();
}

}  // namespace medtpe
