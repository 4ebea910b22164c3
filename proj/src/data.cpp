#include "sdrnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sdrnn {

using ordered_json = nlohmann::ordered_json;

const char* endpoint_kind_name(EndpointKind k) {
  switch (k) {
    case EndpointKind::Rejection: return "rejection";
    case EndpointKind::Loss: return "loss";
    case EndpointKind::Death: return "death";
  }
  return "?";
}

std::optional<EndpointKind> parse_endpoint_kind(const std::string& s) {
  if (s == "rejection") return EndpointKind::Rejection;
  if (s == "loss") return EndpointKind::Loss;
  if (s == "death") return EndpointKind::Death;
  return std::nullopt;
}

int PatientRecord::last_observed_day() const {
  int d = visits.empty() ? 0 : visits.back().day;
  for (const auto& e : endpoint_events) d = std::max(d, e.day);
  return d;
}

std::size_t Vocabulary::static_width() const {
  std::size_t w = 0;
  for (const auto& s : statics) w += s.numeric ? 1 : s.levels.size();
  return w;
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Baseline: return "baseline";
    case Scenario::LongMemory: return "long_memory";
    case Scenario::Recency: return "recency";
    case Scenario::LabExtremes: return "lab_extremes";
  }
  return "?";
}

static Scenario parse_scenario(const std::string& s) {
  if (s == "baseline") return Scenario::Baseline;
  if (s == "long_memory") return Scenario::LongMemory;
  if (s == "recency") return Scenario::Recency;
  if (s == "lab_extremes") return Scenario::LabExtremes;
  throw std::invalid_argument("unknown scenario: '" + s + "'");
}

GenConfig GenConfig::from_kv(KVConfig& kv) {
  GenConfig c;
  c.patients = std::size_t(kv.get_int("patients", std::int64_t(c.patients)));
  c.visits_min = std::size_t(kv.get_int("visits_min", std::int64_t(c.visits_min)));
  c.visits_max = std::size_t(kv.get_int("visits_max", std::int64_t(c.visits_max)));
  c.day_gap_min = int(kv.get_int("day_gap_min", c.day_gap_min));
  c.day_gap_max = int(kv.get_int("day_gap_max", c.day_gap_max));
  c.n_meds = std::size_t(kv.get_int("n_meds", std::int64_t(c.n_meds)));
  c.n_labs = std::size_t(kv.get_int("n_labs", std::int64_t(c.n_labs)));
  c.meds_per_visit =
      std::size_t(kv.get_int("meds_per_visit", std::int64_t(c.meds_per_visit)));
  c.lab_missing_rate = kv.get_double("lab_missing_rate", c.lab_missing_rate);
  c.hazard_rejection = kv.get_double("hazard_rejection", c.hazard_rejection);
  c.hazard_loss = kv.get_double("hazard_loss", c.hazard_loss);
  c.hazard_death = kv.get_double("hazard_death", c.hazard_death);
  c.risk_multiplier_high =
      kv.get_double("risk_multiplier_high", c.risk_multiplier_high);
  c.risk_multiplier_low =
      kv.get_double("risk_multiplier_low", c.risk_multiplier_low);
  c.emit_post_rejection_visits =
      kv.get_bool("emit_post_rejection_visits", c.emit_post_rejection_visits);
  c.scenario = parse_scenario(kv.get_string("scenario", "baseline"));
  c.motif_fraction = kv.get_double("motif_fraction", c.motif_fraction);
  c.motif_gap_min =
      std::size_t(kv.get_int("motif_gap_min", std::int64_t(c.motif_gap_min)));
  c.motif_gap_max =
      std::size_t(kv.get_int("motif_gap_max", std::int64_t(c.motif_gap_max)));
  c.motif_hit_prob = kv.get_double("motif_hit_prob", c.motif_hit_prob);
  c.recency_trigger_prob =
      kv.get_double("recency_trigger_prob", c.recency_trigger_prob);
  c.recency_hit_prob = kv.get_double("recency_hit_prob", c.recency_hit_prob);
  c.extreme_hit_prob = kv.get_double("extreme_hit_prob", c.extreme_hit_prob);
  c.extreme_z_threshold =
      kv.get_double("extreme_z_threshold", c.extreme_z_threshold);
  c.extreme_missing_rate =
      kv.get_double("extreme_missing_rate", c.extreme_missing_rate);
  return c;
}

// -------------------------------------------------------------------------
// generation

namespace {

struct LabModel {
  double mu;
  double sd;
};

std::string med_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "med_%04zu", i);
  return buf;
}

std::string lab_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lab_%03zu", i);
  return buf;
}

Vocabulary make_vocab(const GenConfig& cfg) {
  Vocabulary v;
  for (std::size_t i = 0; i < cfg.n_meds; ++i) v.meds.push_back(med_name(i));
  for (std::size_t i = 0; i < cfg.n_labs; ++i) v.labs.push_back(lab_name(i));
  v.statics = {
      {"sex", false, {"M", "F"}},
      {"blood_type", false, {"A", "B", "AB", "O"}},
      {"primary_disease",
       false,
       {"glomerulonephritis", "diabetes", "polycystic", "hypertension"}},
      {"risk_group", false, {"low", "mid", "high"}},
      {"age", true, {}},
  };
  return v;
}

void validate_gen_config(const GenConfig& cfg) {
  if (cfg.patients == 0) throw std::invalid_argument("patients must be > 0");
  if (cfg.visits_min < 1 || cfg.visits_max < cfg.visits_min) {
    throw std::invalid_argument("invalid visit count range");
  }
  if (cfg.day_gap_min < 1 || cfg.day_gap_max < cfg.day_gap_min) {
    throw std::invalid_argument("invalid day gap range");
  }
  if (cfg.n_labs < 1 || cfg.n_meds < 1) {
    throw std::invalid_argument("vocab sizes must be >= 1");
  }
  if (cfg.scenario == Scenario::LongMemory) {
    if (cfg.n_meds < 4) {
      throw std::invalid_argument("long_memory scenario needs n_meds >= 4");
    }
    if (cfg.motif_gap_max < cfg.motif_gap_min) {
      throw std::invalid_argument("invalid motif gap range");
    }
    const std::size_t needed = 3 + 2 + cfg.motif_gap_max + 2;
    if (needed > cfg.visits_max) {
      throw std::invalid_argument(
          "infeasible config: motif gap does not fit in visits_max (needs " +
          std::to_string(needed) + " visits)");
    }
  }
}

}  // namespace

Cohort generate_cohort(const GenConfig& cfg, std::uint64_t seed) {
  validate_gen_config(cfg);
  Cohort cohort;
  cohort.vocab = make_vocab(cfg);

  std::vector<LabModel> labs(cfg.n_labs);
  for (std::size_t j = 0; j < cfg.n_labs; ++j) {
    labs[j] = {10.0 * double(j + 1), 2.0 + 0.3 * double(j)};
  }

  const double avg_gap = 0.5 * double(cfg.day_gap_min + cfg.day_gap_max);
  Rng root(seed);

  for (std::size_t pi = 0; pi < cfg.patients; ++pi) {
    Rng rng = root.substream(pi);
    PatientRecord rec;
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "p%06zu", pi);
      rec.patient_id = buf;
    }

    // static features
    const auto& sspec = cohort.vocab.statics;
    for (const auto& f : sspec) {
      if (f.numeric) {
        rec.static_features[f.name] =
            StaticValue::number(std::round(50.0 + 12.0 * rng.normal()));
      } else {
        rec.static_features[f.name] =
            StaticValue::category(f.levels[rng.below(f.levels.size())]);
      }
    }
    const std::string& risk = rec.static_features.at("risk_group").cat;
    double mult = 1.0;
    if (risk == "low") mult = cfg.risk_multiplier_low;
    if (risk == "high") mult = cfg.risk_multiplier_high;

    // visit schedule
    std::size_t nv = cfg.visits_min +
                     rng.below(cfg.visits_max - cfg.visits_min + 1);

    // long-memory motif layout
    bool is_motif = false;
    bool forward_order = false;
    std::size_t j1 = 0, j2 = 0, cue = 0;
    if (cfg.scenario == Scenario::LongMemory &&
        rng.uniform() < cfg.motif_fraction) {
      is_motif = true;
      forward_order = rng.uniform() < 0.5;
      j1 = 1 + rng.below(3);
      j2 = j1 + 1 + rng.below(2);
      cue = j2 + cfg.motif_gap_min +
            rng.below(cfg.motif_gap_max - cfg.motif_gap_min + 1);
      nv = std::max(nv, cue + 3);
    }

    std::vector<int> days(nv, 0);
    for (std::size_t t = 1; t < nv; ++t) {
      days[t] = days[t - 1] + cfg.day_gap_min +
                int(rng.below(std::uint64_t(cfg.day_gap_max - cfg.day_gap_min + 1)));
    }

    // per-patient lab offsets
    std::vector<double> lab_offset(cfg.n_labs);
    for (std::size_t j = 0; j < cfg.n_labs; ++j) {
      lab_offset[j] = 0.3 * labs[j].sd * rng.normal();
    }

    // candidate endpoint days, earliest per kind wins
    std::array<std::optional<int>, 3> event_day;
    auto propose = [&](EndpointKind k, int day) {
      auto& slot = event_day[std::size_t(k)];
      if (!slot || day < *slot) slot = day;
    };

    // scenario-planted per-visit effects, decided before visit emission
    std::vector<std::uint8_t> lab0_spike(nv, 0);
    if (is_motif) {
      lab0_spike[cue] = 1;
      if (forward_order && rng.uniform() < cfg.motif_hit_prob) {
        propose(EndpointKind::Rejection, days[cue] + 20 + int(rng.below(41)));
      }
    }
    if (cfg.scenario == Scenario::Recency) {
      for (std::size_t t = 0; t < nv; ++t) {
        if (rng.uniform() < cfg.recency_trigger_prob) {
          lab0_spike[t] = 1;
          if (rng.uniform() < cfg.recency_hit_prob) {
            propose(EndpointKind::Rejection, days[t] + 30 + int(rng.below(121)));
          }
        }
      }
    }

    // background hazards: one draw per inter-visit interval plus a follow-up
    // tail so late visits can still be observed to an event
    const std::size_t tail_intervals = 12;
    for (std::size_t t = 0; t < nv + tail_intervals; ++t) {
      const int d0 = t < nv ? days[t]
                            : days[nv - 1] + int(avg_gap) * int(t - nv + 1);
      const int gap = int(avg_gap);
      auto roll = [&](EndpointKind k, double hazard) {
        if (rng.uniform() < hazard * mult) {
          propose(k, d0 + 1 + int(rng.below(std::uint64_t(gap))));
        }
      };
      roll(EndpointKind::Rejection, cfg.hazard_rejection);
      roll(EndpointKind::Loss, cfg.hazard_loss);
      roll(EndpointKind::Death, cfg.hazard_death);
    }

    // emit visits with meds and labs
    const std::size_t med_lo =
        cfg.scenario == Scenario::LongMemory ? 2 : 0;  // markers reserved
    for (std::size_t t = 0; t < nv; ++t) {
      Visit v;
      v.day = days[t];
      for (std::size_t m = 0; m < cfg.meds_per_visit; ++m) {
        const std::size_t mi =
            med_lo + rng.below(std::uint64_t(cfg.n_meds - med_lo));
        const std::string& name = cohort.vocab.meds[mi];
        if (std::find(v.meds.begin(), v.meds.end(), name) == v.meds.end()) {
          v.meds.push_back(name);
        }
      }
      if (is_motif) {
        if (t == j1) v.meds.push_back(cohort.vocab.meds[forward_order ? 0 : 1]);
        if (t == j2) v.meds.push_back(cohort.vocab.meds[forward_order ? 1 : 0]);
      }
      for (std::size_t j = 0; j < cfg.n_labs; ++j) {
        const bool spiked = (j == 0 && lab0_spike[t]);
        if (cfg.scenario == Scenario::LabExtremes && j < 2 && !spiked) {
          // informative labs belong to the routine panel: drawn every visit,
          // within-reference results reported as the reference value.  Tail
          // draws raise short-term risk whether or not they are recorded,
          // and are dropped by the analyzer at their own rate (missing not
          // at random).
          const double z = rng.normal();
          const bool extreme = std::abs(z) > cfg.extreme_z_threshold;
          if (extreme && rng.uniform() < cfg.extreme_hit_prob) {
            propose(EndpointKind::Rejection, days[t] + 30 + int(rng.below(121)));
          }
          if (!extreme) {
            v.labs[cohort.vocab.labs[j]] = labs[j].mu;
          } else if (rng.uniform() >= cfg.extreme_missing_rate) {
            v.labs[cohort.vocab.labs[j]] = labs[j].mu + z * labs[j].sd;
          }
          continue;
        }
        if (!spiked && rng.uniform() < cfg.lab_missing_rate) continue;
        double value;
        if (spiked) {
          value = labs[j].mu + 3.0 * labs[j].sd;
        } else {
          const double z = rng.normal();
          value = labs[j].mu + lab_offset[j] + z * labs[j].sd;
        }
        v.labs[cohort.vocab.labs[j]] = value;
      }
      rec.visits.push_back(std::move(v));
    }

    // materialize events, truncate visits after death (and optionally after
    // rejection)
    for (int k = 0; k < 3; ++k) {
      if (event_day[k]) {
        rec.endpoint_events.push_back({EndpointKind(k), *event_day[k]});
      }
    }
    std::sort(rec.endpoint_events.begin(), rec.endpoint_events.end(),
              [](const EndpointEvent& a, const EndpointEvent& b) {
                return a.day < b.day;
              });
    int cutoff_day = -1;
    for (const auto& e : rec.endpoint_events) {
      if (e.kind == EndpointKind::Death ||
          (e.kind == EndpointKind::Rejection &&
           !cfg.emit_post_rejection_visits)) {
        cutoff_day = e.day;
        break;
      }
    }
    if (cutoff_day >= 0) {
      // events after the cutoff are unobserved
      rec.endpoint_events.erase(
          std::remove_if(rec.endpoint_events.begin(), rec.endpoint_events.end(),
                         [&](const EndpointEvent& e) { return e.day > cutoff_day; }),
          rec.endpoint_events.end());
      while (!rec.visits.empty() && rec.visits.back().day > cutoff_day) {
        rec.visits.pop_back();
      }
    }
    if (rec.visits.empty()) {
      // death before the second visit; keep the first visit
      Visit v;
      v.day = 0;
      rec.visits.push_back(v);
    }
    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

// -------------------------------------------------------------------------
// preprocessing

CohortStats fit_lab_stats(const std::vector<const PatientRecord*>& training,
                          const Vocabulary& vocab) {
  if (training.empty()) {
    throw std::invalid_argument("fit_lab_stats: empty training set");
  }
  CohortStats st;
  for (const auto& lab : vocab.labs) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto* p : training) {
      for (const auto& v : p->visits) {
        auto it = v.labs.find(lab);
        if (it != v.labs.end()) {
          sum += it->second;
          sumsq += it->second * it->second;
          ++n;
        }
      }
    }
    LabStat s;
    if (n == 0) {
      s.degenerate = true;
    } else {
      s.mean = sum / double(n);
      const double var = std::max(0.0, sumsq / double(n) - s.mean * s.mean);
      s.std = std::sqrt(var);
      if (s.std == 0.0) s.degenerate = true;
    }
    st.labs[lab] = s;
  }
  for (const auto& f : vocab.statics) {
    if (!f.numeric) continue;
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto* p : training) {
      auto it = p->static_features.find(f.name);
      if (it != p->static_features.end() && it->second.numeric) {
        sum += it->second.num;
        sumsq += it->second.num * it->second.num;
        ++n;
      }
    }
    LabStat s;
    if (n == 0) {
      s.degenerate = true;
    } else {
      s.mean = sum / double(n);
      const double var = std::max(0.0, sumsq / double(n) - s.mean * s.mean);
      s.std = std::sqrt(var);
      if (s.std == 0.0) s.degenerate = true;
    }
    st.static_numeric[f.name] = s;
  }
  return st;
}

void discretize_labs(const std::map<std::string, double>& visit_labs,
                     const Vocabulary& vocab, const CohortStats& stats,
                     double* out) {
  for (std::size_t j = 0; j < vocab.labs.size(); ++j) {
    double* slot = out + 3 * j;  // [High, Normal, Low]
    slot[0] = slot[1] = slot[2] = 0.0;
    auto it = visit_labs.find(vocab.labs[j]);
    if (it == visit_labs.end()) continue;  // missing -> all zero
    const LabStat& s = stats.labs.at(vocab.labs[j]);
    if (s.degenerate) {
      slot[1] = 1.0;
      continue;
    }
    const double v = it->second;
    if (v > s.mean + s.std) slot[0] = 1.0;
    else if (v < s.mean - s.std) slot[2] = 1.0;
    else slot[1] = 1.0;  // boundaries inclusive to Normal
  }
}

static void encode_meds(const Visit& visit, const Vocabulary& vocab,
                        UnknownTokenPolicy policy, Vector& out) {
  for (const auto& m : visit.meds) {
    auto it = std::find(vocab.meds.begin(), vocab.meds.end(), m);
    if (it == vocab.meds.end()) {
      if (policy == UnknownTokenPolicy::Reject) {
        throw std::invalid_argument("unknown medication token: '" + m + "'");
      }
      continue;
    }
    out[std::size_t(it - vocab.meds.begin())] = 1.0;
  }
}

Vector encode_visit(const Visit& visit, const Vocabulary& vocab,
                    const CohortStats& stats, UnknownTokenPolicy policy) {
  Vector out(vocab.dynamic_width(), 0.0);
  encode_meds(visit, vocab, policy, out);
  for (const auto& [name, value] : visit.labs) {
    if (!stats.labs.count(name) && policy == UnknownTokenPolicy::Reject) {
      throw std::invalid_argument("unknown lab token: '" + name + "'");
    }
  }
  discretize_labs(visit.labs, vocab, stats, out.data() + vocab.meds.size());
  return out;
}

Vector encode_visit_degraded(const Visit& visit, const Vocabulary& vocab,
                             const CohortStats& stats,
                             UnknownTokenPolicy policy) {
  Vector out(vocab.degraded_dynamic_width(), 0.0);
  encode_meds(visit, vocab, policy, out);
  for (std::size_t j = 0; j < vocab.labs.size(); ++j) {
    const LabStat& s = stats.labs.at(vocab.labs[j]);
    auto it = visit.labs.find(vocab.labs[j]);
    // mean imputation then standardization: missing values land at 0
    double z = 0.0;
    if (it != visit.labs.end() && !s.degenerate) {
      z = (it->second - s.mean) / s.std;
    }
    out[vocab.meds.size() + j] = z;
  }
  return out;
}

Vector encode_static(const std::map<std::string, StaticValue>& features,
                     const Vocabulary& vocab, const CohortStats& stats) {
  Vector out(vocab.static_width(), 0.0);
  std::size_t off = 0;
  for (const auto& f : vocab.statics) {
    auto it = features.find(f.name);
    if (f.numeric) {
      if (it != features.end() && it->second.numeric) {
        const LabStat& s = stats.static_numeric.at(f.name);
        out[off] = s.degenerate ? 0.0 : (it->second.num - s.mean) / s.std;
      }
      off += 1;
    } else {
      if (it != features.end() && !it->second.numeric) {
        auto lv = std::find(f.levels.begin(), f.levels.end(), it->second.cat);
        // unknown category leaves the whole block zero
        if (lv != f.levels.end()) {
          out[off + std::size_t(lv - f.levels.begin())] = 1.0;
        }
      }
      off += f.levels.size();
    }
  }
  return out;
}

TargetRows build_targets(const PatientRecord& p) {
  TargetRows rows;
  const int last = p.last_observed_day();
  rows.bits.resize(p.visits.size());
  rows.evaluable.resize(p.visits.size());
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    const int d = p.visits[t].day;
    auto& bits = rows.bits[t];
    bits.fill(0);
    bool any_in_window = false;
    for (const auto& e : p.endpoint_events) {
      if (e.day <= d) continue;
      const int col = 2 * int(e.kind);
      if (e.day <= d + kHorizon6m) bits[col] = 1;
      if (e.day <= d + kHorizon12m) {
        bits[col + 1] = 1;
        any_in_window = true;
      }
    }
    rows.evaluable[t] = (last >= d + kHorizon12m || any_in_window) ? 1 : 0;
  }
  return rows;
}

SplitIndices split_patients(std::size_t n, Rng rng, double frac_train,
                            double frac_val, double frac_test) {
  if (n < 3) throw std::invalid_argument("split_patients: need >= 3 patients");
  if (std::abs(frac_train + frac_val + frac_test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  const std::size_t n_val = std::size_t(std::floor(frac_val * double(n)));
  const std::size_t n_test = std::size_t(std::floor(frac_test * double(n)));
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.validation.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

static std::uint64_t fnv1a_str(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t split_digest(const Cohort& cohort, const SplitIndices& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_set = [&](const char* tag, const std::vector<std::size_t>& idx) {
    std::vector<std::string> ids;
    for (auto i : idx) ids.push_back(cohort.patients[i].patient_id);
    std::sort(ids.begin(), ids.end());
    h = fnv1a_str(h, tag);
    for (const auto& id : ids) h = fnv1a_str(h, id + ";");
  };
  mix_set("train:", s.train);
  mix_set("val:", s.validation);
  mix_set("test:", s.test);
  return h;
}

std::vector<const PatientRecord*> select(const Cohort& c,
                                         const std::vector<std::size_t>& idx) {
  std::vector<const PatientRecord*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&c.patients[i]);
  return out;
}

EncodedCohort encode_cohort(const Cohort& cohort,
                            const std::vector<const PatientRecord*>& stats_from,
                            bool degraded) {
  CohortStats stats = fit_lab_stats(stats_from, cohort.vocab);
  EncodedCohort enc;
  enc.static_dim = cohort.vocab.static_width();
  enc.dynamic_dim = degraded ? cohort.vocab.degraded_dynamic_width()
                             : cohort.vocab.dynamic_width();
  enc.patients.reserve(cohort.patients.size());
  for (const auto& rec : cohort.patients) {
    EncodedPatient p;
    p.id = rec.patient_id;
    p.stat = encode_static(rec.static_features, cohort.vocab, stats);
    for (const auto& v : rec.visits) {
      p.visits.push_back(degraded
                             ? encode_visit_degraded(v, cohort.vocab, stats)
                             : encode_visit(v, cohort.vocab, stats));
    }
    TargetRows rows = build_targets(rec);
    p.targets = std::move(rows.bits);
    p.evaluable = std::move(rows.evaluable);
    enc.patients.push_back(std::move(p));
  }
  return enc;
}

// -------------------------------------------------------------------------
// file formats

void save_cohort(const Cohort& c, const std::string& cohort_path,
                 const std::string& vocab_path) {
  {
    std::ofstream out(cohort_path);
    if (!out) throw std::runtime_error("cannot write " + cohort_path);
    for (const auto& p : c.patients) {
      ordered_json jp;
      jp["patient_id"] = p.patient_id;
      ordered_json js = ordered_json::object();
      for (const auto& [k, v] : p.static_features) {
        if (v.numeric) js[k] = v.num;
        else js[k] = v.cat;
      }
      jp["static_features"] = js;
      ordered_json jv = ordered_json::array();
      for (const auto& visit : p.visits) {
        ordered_json j;
        j["day"] = visit.day;
        j["meds"] = visit.meds;
        ordered_json jl = ordered_json::object();
        for (const auto& [k, v] : visit.labs) jl[k] = v;
        j["labs"] = jl;
        jv.push_back(j);
      }
      jp["visits"] = jv;
      ordered_json je = ordered_json::array();
      for (const auto& e : p.endpoint_events) {
        je.push_back({{"kind", endpoint_kind_name(e.kind)}, {"day", e.day}});
      }
      jp["endpoint_events"] = je;
      out << jp.dump() << "\n";
    }
  }
  {
    std::ofstream out(vocab_path);
    if (!out) throw std::runtime_error("cannot write " + vocab_path);
    ordered_json j;
    j["medications"] = c.vocab.meds;
    j["labs"] = c.vocab.labs;
    ordered_json js = ordered_json::array();
    for (const auto& f : c.vocab.statics) {
      ordered_json jf;
      jf["name"] = f.name;
      if (f.numeric) jf["numeric"] = true;
      else jf["levels"] = f.levels;
      js.push_back(jf);
    }
    j["static_features"] = js;
    out << j.dump(2) << "\n";
  }
}

Cohort load_cohort(const std::string& cohort_path,
                   const std::string& vocab_path) {
  Cohort c;
  {
    std::ifstream in(vocab_path);
    if (!in) throw std::runtime_error("cannot open " + vocab_path);
    ordered_json j = ordered_json::parse(in);
    c.vocab.meds = j.at("medications").get<std::vector<std::string>>();
    c.vocab.labs = j.at("labs").get<std::vector<std::string>>();
    for (const auto& jf : j.at("static_features")) {
      StaticFeatureSpec f;
      f.name = jf.at("name").get<std::string>();
      if (jf.contains("numeric") && jf["numeric"].get<bool>()) {
        f.numeric = true;
      } else {
        f.levels = jf.at("levels").get<std::vector<std::string>>();
      }
      c.vocab.statics.push_back(std::move(f));
    }
  }
  {
    std::ifstream in(cohort_path);
    if (!in) throw std::runtime_error("cannot open " + cohort_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      PatientRecord p;
      try {
        ordered_json j = ordered_json::parse(line);
        p.patient_id = j.at("patient_id").get<std::string>();
        for (const auto& [k, v] : j.at("static_features").items()) {
          if (v.is_number()) {
            p.static_features[k] = StaticValue::number(v.get<double>());
          } else {
            p.static_features[k] = StaticValue::category(v.get<std::string>());
          }
        }
        int prev_day = -1;
        for (const auto& jv : j.at("visits")) {
          Visit v;
          v.day = jv.at("day").get<int>();
          if (v.day <= prev_day) {
            throw std::invalid_argument("visit days not strictly increasing");
          }
          prev_day = v.day;
          v.meds = jv.at("meds").get<std::vector<std::string>>();
          for (const auto& [k, val] : jv.at("labs").items()) {
            v.labs[k] = val.get<double>();
          }
          p.visits.push_back(std::move(v));
        }
        for (const auto& je : j.at("endpoint_events")) {
          auto kind = parse_endpoint_kind(je.at("kind").get<std::string>());
          if (!kind) throw std::invalid_argument("unknown endpoint kind");
          const int day = je.at("day").get<int>();
          if (day < 0) throw std::invalid_argument("negative endpoint day");
          p.endpoint_events.push_back({*kind, day});
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("cohort file line " + std::to_string(lineno) +
                                 " (patient " + p.patient_id + "): " + e.what());
      }
      c.patients.push_back(std::move(p));
    }
  }
  return c;
}

CohortSummary summarize(const Cohort& c) {
  CohortSummary s;
  s.patients = c.patients.size();
  std::size_t positives = 0;
  for (const auto& p : c.patients) {
    s.visits += p.visits.size();
    if (!p.endpoint_events.empty()) {
      s.endpoint_patient_frac += 1.0;
    }
    TargetRows rows = build_targets(p);
    for (std::size_t t = 0; t < rows.bits.size(); ++t) {
      if (!rows.evaluable[t]) continue;
      ++s.evaluable_visits;
      for (int k = 0; k < kNumLabels; ++k) positives += rows.bits[t][k];
    }
  }
  if (s.evaluable_visits > 0) {
    s.target_density =
        double(positives) / (double(s.evaluable_visits) * kNumLabels);
  }
  if (s.patients > 0) s.endpoint_patient_frac /= double(s.patients);
  return s;
}

}  // namespace sdrnn
