#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace appd {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class Label { anomalous, normal, unknown };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::anomalous: return "anomalous";
    case Label::normal: return "normal";
    default: return "unknown";
  }
}

/// One observation: occurrence time plus a mark vector. Marks live in
/// [0, 2*pi] per coordinate once normalized; the vector may be empty for
/// purely temporal data.
struct Event {
  double t = 0.0;
  std::vector<double> mark;
};

struct Sequence {
  std::vector<Event> events;
  double horizon = 0.0;
  Label label = Label::unknown;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }

  /// Mark dimensionality, inferred from the first event (0 when empty).
  int mark_dim() const {
    return events.empty() ? 0 : static_cast<int>(events.front().mark.size());
  }

  Sequence prefix(std::size_t n) const {
    Sequence out;
    out.events.assign(events.begin(), events.begin() + std::min(n, events.size()));
    out.horizon = horizon;
    out.label = label;
    return out;
  }
};

/// Per-coordinate affine rescaling of raw marks onto [0, 2*pi].
struct MarkNormalization {
  std::vector<std::array<double, 2>> ranges;  // {a, b} with b > a

  int dim() const { return static_cast<int>(ranges.size()); }
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Collects every violated invariant; an empty result means the sequence is
/// valid. Violations are data, not failures.
inline std::vector<std::string> validate(const Sequence& seq) {
  std::vector<std::string> violations;
  auto add = [&](std::string msg) { violations.push_back(std::move(msg)); };

  if (!(seq.horizon > 0.0) || !std::isfinite(seq.horizon)) {
    add("horizon must be positive and finite");
  }
  const int d = seq.mark_dim();
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const Event& e = seq.events[i];
    if (!std::isfinite(e.t) || e.t < 0.0) {
      add("non-finite or negative time at index " + std::to_string(i));
    }
    if (e.t >= seq.horizon) {
      add("event beyond horizon at index " + std::to_string(i));
    }
    if (i > 0 && !(seq.events[i - 1].t < e.t)) {
      add("non-strict ordering at index " + std::to_string(i));
    }
    if (static_cast<int>(e.mark.size()) != d) {
      add("mark dimension mismatch at index " + std::to_string(i));
    }
    for (std::size_t c = 0; c < e.mark.size(); ++c) {
      if (!std::isfinite(e.mark[c])) {
        add("non-finite mark at index " + std::to_string(i));
        break;
      }
      if (e.mark[c] < 0.0 || e.mark[c] > kTwoPi) {
        add("mark coordinate outside [0, 2pi] at index " + std::to_string(i));
        break;
      }
    }
  }
  return violations;
}

inline Sequence normalize_marks(const Sequence& seq, const MarkNormalization& norm) {
  Sequence out = seq;
  for (std::size_t i = 0; i < out.events.size(); ++i) {
    Event& e = out.events[i];
    if (static_cast<int>(e.mark.size()) != norm.dim()) {
      throw ValidationError("mark dimension mismatch at event " + std::to_string(i));
    }
    for (int c = 0; c < norm.dim(); ++c) {
      const auto [a, b] = norm.ranges[c];
      if (!(b > a)) {
        throw ValidationError("degenerate mark range for coordinate " + std::to_string(c));
      }
      const double m = e.mark[c];
      if (m < a || m > b) {
        throw ValidationError("mark coordinate " + std::to_string(c) +
                              " out of range at event " + std::to_string(i));
      }
      e.mark[c] = (m - a) / (b - a) * kTwoPi;
    }
  }
  return out;
}

inline Sequence denormalize_marks(const Sequence& seq, const MarkNormalization& norm) {
  Sequence out = seq;
  for (std::size_t i = 0; i < out.events.size(); ++i) {
    Event& e = out.events[i];
    if (static_cast<int>(e.mark.size()) != norm.dim()) {
      throw ValidationError("mark dimension mismatch at event " + std::to_string(i));
    }
    for (int c = 0; c < norm.dim(); ++c) {
      const auto [a, b] = norm.ranges[c];
      e.mark[c] = a + e.mark[c] / kTwoPi * (b - a);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines persistence. One sequence per line:
//   {"events":[{"mark":[...],"t":...},...],"horizon":...,"label":"..."}
// nlohmann::json keeps object keys sorted, so re-serialization is
// byte-stable.
// ---------------------------------------------------------------------------

inline nlohmann::json sequence_to_json(const Sequence& seq) {
  nlohmann::json events = nlohmann::json::array();
  for (const Event& e : seq.events) {
    events.push_back({{"t", e.t}, {"mark", e.mark}});
  }
  nlohmann::json j{{"horizon", seq.horizon}, {"events", std::move(events)}};
  if (seq.label != Label::unknown) {
    j["label"] = label_name(seq.label);
  }
  return j;
}

inline Sequence sequence_from_json(const nlohmann::json& j) {
  Sequence seq;
  seq.horizon = j.at("horizon").get<double>();
  if (j.contains("label")) {
    const std::string l = j.at("label").get<std::string>();
    if (l == "anomalous") {
      seq.label = Label::anomalous;
    } else if (l == "normal") {
      seq.label = Label::normal;
    } else if (l == "unknown") {
      seq.label = Label::unknown;
    } else {
      throw ValidationError("unknown label value: " + l);
    }
  }
  for (const auto& ej : j.at("events")) {
    Event e;
    e.t = ej.at("t").get<double>();
    if (ej.contains("mark")) {
      e.mark = ej.at("mark").get<std::vector<double>>();
    }
    seq.events.push_back(std::move(e));
  }
  return seq;
}

/// Structural validation applied on load: ordering, horizon, finiteness and a
/// consistent mark dimension. The [0, 2pi] mark range is deliberately not
/// enforced here so raw data can be loaded and then normalized; use
/// validate() for the full invariant set.
inline void check_structure(const Sequence& seq, const std::string& context) {
  if (!(seq.horizon > 0.0) || !std::isfinite(seq.horizon)) {
    throw ValidationError(context + ": horizon must be positive and finite");
  }
  const int d = seq.mark_dim();
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const Event& e = seq.events[i];
    if (!std::isfinite(e.t) || e.t < 0.0) {
      throw ValidationError(context + ": non-finite or negative time at index " +
                            std::to_string(i));
    }
    if (e.t >= seq.horizon) {
      throw ValidationError(context + ": event beyond horizon at index " +
                            std::to_string(i));
    }
    if (i > 0 && !(seq.events[i - 1].t < e.t)) {
      throw ValidationError(context + ": non-monotone times at index " +
                            std::to_string(i));
    }
    if (static_cast<int>(e.mark.size()) != d) {
      throw ValidationError(context + ": mark dimension mismatch at index " +
                            std::to_string(i));
    }
    for (double m : e.mark) {
      if (!std::isfinite(m)) {
        throw ValidationError(context + ": non-finite mark at index " +
                              std::to_string(i));
      }
    }
  }
}

inline std::vector<Sequence> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::vector<Sequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed line: " + e.what());
    }
    Sequence seq;
    try {
      seq = sequence_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": bad record: " + e.what());
    }
    check_structure(seq, path.string() + ":" + std::to_string(line_no));
    out.push_back(std::move(seq));
  }
  return out;
}

inline void save_jsonl(std::span<const Sequence> seqs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  for (const Sequence& seq : seqs) {
    out << sequence_to_json(seq).dump() << '\n';
  }
}

}  // namespace appd
