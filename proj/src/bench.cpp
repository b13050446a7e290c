#include "string_rope/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <random>

namespace string_rope {

StringParams ShiftTemplate::for_length(std::int64_t seq_len) const {
  const StringParams p{seq_len, seq_len * numerator / denominator, window};
  check_params(p);
  return p;
}

ShiftTemplate parse_shift_fraction(const std::string& text, std::int64_t window) {
  ShiftTemplate t;
  t.window = window;
  const auto fail = [&] { return InvalidParams("--shift-frac: cannot parse `" + text + "`"); };
  try {
    if (const auto slash = text.find('/'); slash != std::string::npos) {
      std::size_t used_num = 0;
      std::size_t used_den = 0;
      t.numerator = std::stoll(text.substr(0, slash), &used_num);
      t.denominator = std::stoll(text.substr(slash + 1), &used_den);
      if (used_num != slash || used_den != text.size() - slash - 1) throw fail();
    } else {
      // Decimal: keep it exact as digits / 10^k.
      const auto dot = text.find('.');
      const std::string whole = text.substr(0, dot);
      const std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
      if (frac.size() > 12 || (whole + frac).empty()) throw fail();
      for (char c : whole + frac)
        if (c < '0' || c > '9') throw fail();
      t.numerator = std::stoll(whole.empty() ? "0" : whole);
      t.denominator = 1;
      for (char c : frac) {
        t.numerator = t.numerator * 10 + (c - '0');
        t.denominator *= 10;
      }
    }
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (t.denominator <= 0 || t.numerator <= 0 || t.numerator >= t.denominator)
    throw InvalidParams("--shift-frac: must lie strictly between 0 and 1");
  return t;
}

void BenchReport::write_csv(std::ostream& sink) const {
  sink << "L,strategy,median_ms,score_pairs,peak_aux_bytes\n";
  for (const auto& r : records)
    sink << r.seq_len << ',' << r.strategy << ',' << std::fixed << std::setprecision(3) << r.median_ms
         << ',' << r.score_pairs << ',' << r.peak_aux_bytes << '\n';
}

template <typename Scalar>
AttentionInputs<Scalar> random_inputs(Index seq_len, Index head_dim, std::uint64_t seed, double rope_base) {
  std::mt19937_64 engine(seed);
  const auto fill = [&](Matrix<Scalar>& m) {
    m.resize(seq_len, head_dim);
    for (Index i = 0; i < seq_len; ++i)
      for (Index j = 0; j < head_dim; ++j)
        m(i, j) = static_cast<Scalar>(2.0 * (static_cast<double>(engine() >> 11) * 0x1.0p-53) - 1.0);
  };
  AttentionInputs<Scalar> in;
  fill(in.q);
  fill(in.k);
  fill(in.v);
  in.rope = RopeConfig{head_dim, rope_base};
  return in;
}

template AttentionInputs<float> random_inputs<float>(Index, Index, std::uint64_t, double);
template AttentionInputs<double> random_inputs<double>(Index, Index, std::uint64_t, double);

namespace {

template <typename Fn>
BenchRecord time_runs(Index len, const char* name, int repeats, Fn&& run) {
  std::vector<double> ms;
  KernelStats stats;
  for (int r = 0; r < repeats; ++r) {
    stats = KernelStats{};
    const auto t0 = std::chrono::steady_clock::now();
    run(stats);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t mid = ms.size() / 2;
  const double median = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
  return BenchRecord{len, name, median, stats.evaluated_pairs, stats.peak_aux_bytes};
}

}  // namespace

BenchReport bench_attention(const std::vector<Index>& lengths, const ShiftTemplate& shift,
                            Index head_dim, int repeats, std::uint64_t seed) {
  if (repeats < 3) throw ContractViolation("bench_attention: repeats must be >= 3");
  if (!std::is_sorted(lengths.begin(), lengths.end()))
    throw ContractViolation("bench_attention: lengths must be ascending");
  BenchReport report;
  for (const Index len : lengths) {
    const StringParams p = shift.for_length(len);
    const auto in = random_inputs<float>(len, head_dim, seed);
    const RelPosMap map = RelPosMap::shifted(p);
    report.records.push_back(time_runs(len, "naive", repeats, [&](KernelStats& stats) {
      (void)naive_relpos_attention(in, map, &stats);
    }));
    report.records.push_back(time_runs(len, "string", repeats, [&](KernelStats& stats) {
      KernelOptions opt;
      opt.stats = &stats;
      (void)string_attention(in, p, opt);
    }));
  }
  return report;
}

}  // namespace string_rope
