#include "string_rope/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "string_rope/bench.hpp"
#include "string_rope/freq.hpp"
#include "string_rope/posmap.hpp"
#include "string_rope/toy_model.hpp"

namespace string_rope {

namespace {

// Usage-level failure detected after flag parsing; exits 2.
struct UsageError : std::runtime_error {
  UsageError(const std::string& flag, const std::string& what) : std::runtime_error(flag + ": " + what) {}
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct PosmapArgs {
  Index len = 0, shift = 0, window = 0, limit = kDefaultMaterializeLimit;
  bool stages = false;
  std::string format = "ascii";
};

int run_posmap(const PosmapArgs& a, std::ostream& out, std::ostream& err) {
  const StringParams p{a.len, a.shift, a.window};
  std::vector<std::string> advisories;
  try {
    advisories = validate_params(p);
  } catch (const InvalidParams& e) {
    throw UsageError("--shift/--window", e.what());
  }
  for (const auto& adv : advisories) err << "advisory: " << adv << '\n';

  StageMatrices st;
  try {
    st = build_stage_matrices(a.len, a.shift, a.window, a.limit);
  } catch (const MaterializationRefused& e) {
    throw UsageError("--limit", e.what());
  }
  const auto render = [&](const IndexMatrix& m) { return a.format == "csv" ? render_csv(m) : render_ascii(m); };
  if (a.stages) {
    out << "# stage a: drop ids >= N=" << p.triangle() << '\n' << render(st.dropped) << '\n';
    out << "# stage b: shift by S=" << p.shift << '\n' << render(st.shifted) << '\n';
    out << "# stage c: add W=" << p.window << '\n';
  }
  out << render(st.final_);
  return kExitOk;
}

struct FreqArgs {
  std::string hist, out, packing = "none";
  std::int64_t train_len = 0;
  std::int64_t tail_at = -1;
};

int run_freq(const FreqArgs& a, std::ostream& out) {
  std::ifstream in(a.hist);
  if (!in) throw UsageError("--hist", "cannot open " + a.hist);
  LengthHistogram h;
  try {
    h = load_histogram(in);
  } catch (const ParseError& e) {
    throw UsageError("--hist", a.hist + ": " + e.what());
  }
  const PackingMode mode = a.packing == "truncate" ? PackingMode::truncate_chunks
                           : a.packing == "concat" ? PackingMode::concat_chunks
                                                   : PackingMode::none;
  const FreqCurve curve = position_freq(apply_packing(h, a.train_len, mode), a.train_len);

  std::ofstream sink(a.out, std::ios::binary);
  if (!sink) throw UsageError("--out", "cannot write " + a.out);
  export_curve(curve, sink);

  if (a.tail_at >= 0) {
    if (a.tail_at >= a.train_len) throw UsageError("--tail-at", "must be < --train-len");
    out << "tail_share[>=" << a.tail_at << "]=" << std::fixed << std::setprecision(6)
        << tail_share(curve, a.tail_at) << '\n';
  }
  return kExitOk;
}

struct AttnArgs {
  Index len = 0, dim = 0, shift = 0, window = 0;
  std::uint64_t seed = 0;
  std::string dtype = "double";
};

template <typename Scalar>
int run_attn_check(const AttnArgs& a, std::ostream& out) {
  const StringParams p{a.len, a.shift, a.window};
  try {
    check_params(p);
  } catch (const InvalidParams& e) {
    throw UsageError("--shift/--window", e.what());
  }
  if (a.dim < 2 || a.dim % 2) throw UsageError("--dim", "must be even and >= 2");
  const auto in = random_inputs<Scalar>(a.len, a.dim, a.seed);
  const Matrix<Scalar> fast = string_attention(in, p);
  const Matrix<Scalar> ref = naive_relpos_attention(in, RelPosMap::shifted(p));
  const double diff = (fast.template cast<double>() - ref.template cast<double>()).cwiseAbs().maxCoeff();
  const double tol = kAttentionTolerance.of<Scalar>();
  const bool ok = diff <= tol;
  out << "max_abs_diff=" << std::scientific << std::setprecision(3) << diff << " tolerance=" << tol
      << " dtype=" << to_string(precision_of<Scalar>()) << ' ' << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

struct BenchArgs {
  std::string lens, shift_frac = "1/3", out;
  Index dim = 64;
  std::int64_t window = 32;
  int repeats = 3;
};

int run_bench(const BenchArgs& a, std::ostream& out) {
  std::vector<Index> lengths;
  std::stringstream ss(a.lens);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      lengths.push_back(std::stoll(item, &used));
      if (used != item.size() || lengths.back() < 2) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--lens", "bad length `" + item + "`");
    }
  }
  if (lengths.empty()) throw UsageError("--lens", "no lengths given");
  if (!std::is_sorted(lengths.begin(), lengths.end())) throw UsageError("--lens", "must be ascending");
  if (a.repeats < 3) throw UsageError("--repeats", "must be >= 3");
  if (a.dim < 2 || a.dim % 2) throw UsageError("--dim", "must be even and >= 2");

  ShiftTemplate t;
  try {
    t = parse_shift_fraction(a.shift_frac, a.window);
    for (const Index len : lengths) (void)t.for_length(len);
  } catch (const InvalidParams& e) {
    throw UsageError("--shift-frac/--window", e.what());
  }

  const BenchReport report = bench_attention(lengths, t, a.dim, a.repeats);
  std::ofstream sink(a.out, std::ios::binary);
  if (!sink) throw UsageError("--out", "cannot write " + a.out);
  report.write_csv(sink);
  out << "wrote " << report.records.size() << " records to " << a.out << '\n';
  return kExitOk;
}

struct ModelArgs {
  ToyModelConfig cfg;
  std::string mode = "rope";
  std::int64_t shift = -1, window = -1;
  bool compare = false;
};

int run_model(const ModelArgs& a, std::ostream& out) {
  try {
    a.cfg.validate();
  } catch (const ContractViolation& e) {
    throw UsageError("--heads/--dmodel", e.what());
  }
  const Index len = a.cfg.seq_len;
  StringParams p{len, a.shift >= 0 ? a.shift : len / 3, 0};
  p.window = a.window >= 0 ? a.window : std::max<std::int64_t>(0, std::min<std::int64_t>(128, p.shift - 1));
  const bool needs_params = a.compare || a.mode != "rope";
  if (needs_params) {
    try {
      check_params(p);
    } catch (const InvalidParams& e) {
      throw UsageError("--shift/--window", e.what());
    }
  }

  const auto model = init_model<double>(a.cfg);
  const auto tokens = make_tokens(a.cfg);
  out << "weights_checksum=" << hex(model.checksum()) << '\n';
  for (const auto& b : model.init_bounds) out << "init " << b.tensor << " U(-" << b.bound << ", " << b.bound << ")\n";

  const auto run = [&](const AttentionStrategy& s) {
    const Matrix<double> logits = forward(model, tokens, s);
    out << "mode=" << strategy_name(s);
    if (s.index() != 0) out << " shift=" << p.shift << " window=" << p.window;
    out << " logits_checksum=" << hex(matrix_checksum(logits)) << '\n';
    return logits;
  };

  if (!a.compare) {
    const AttentionStrategy s = a.mode == "string"         ? AttentionStrategy{ShiftedRope{p}}
                                : a.mode == "naive-string" ? AttentionStrategy{NaiveShiftedRope{p}}
                                                           : AttentionStrategy{StandardRope{}};
    (void)run(s);
    return kExitOk;
  }
  const Matrix<double> fast = run(ShiftedRope{p});
  const Matrix<double> ref = run(NaiveShiftedRope{p});
  const LogitsComparison c = compare_logits(fast, ref);
  const double tol = kLogitsTolerance.of<double>();
  const bool ok = c.max_abs <= tol;
  out << "compare string vs naive-string: max_abs=" << std::scientific << std::setprecision(3) << c.max_abs
      << " mean_abs=" << c.mean_abs << " argmax_mismatch_rows=" << c.argmax_mismatch_rows
      << " tolerance=" << tol << ' ' << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shifted rotary position maps, attention checks and position-frequency analysis", "strope"};
  app.require_subcommand(1);

  PosmapArgs pm;
  auto* posmap = app.add_subcommand("posmap", "Render the shifted relative-position matrix");
  posmap->add_option("--len", pm.len, "Sequence length L")->required()->check(CLI::Range(2, 1 << 30));
  posmap->add_option("--shift", pm.shift, "Shift offset S")->required();
  posmap->add_option("--window", pm.window, "Local window W")->required();
  posmap->add_flag("--stages", pm.stages, "Print the drop, shift and window stages");
  posmap->add_option("--format", pm.format, "ascii or csv")->check(CLI::IsMember({"ascii", "csv"}));
  posmap->add_option("--limit", pm.limit, "Largest L to materialize")->check(CLI::PositiveNumber);

  FreqArgs fq;
  auto* freq = app.add_subcommand("freq", "Position-frequency curve from a length histogram");
  freq->add_option("--hist", fq.hist, "CSV of length,count")->required();
  freq->add_option("--train-len", fq.train_len, "Training length L")->required()->check(CLI::PositiveNumber);
  freq->add_option("--packing", fq.packing, "none, truncate or concat")
      ->check(CLI::IsMember({"none", "truncate", "concat"}));
  freq->add_option("--out", fq.out, "Output CSV (position,frequency)")->required();
  freq->add_option("--tail-at", fq.tail_at, "Report the frequency share at positions >= POS")
      ->check(CLI::NonNegativeNumber);

  AttnArgs at;
  auto* attn = app.add_subcommand("attn-check", "Compare the decomposed kernel against the naive oracle");
  attn->add_option("--len", at.len, "Sequence length L")->required()->check(CLI::Range(2, 1 << 20));
  attn->add_option("--dim", at.dim, "Head dimension")->required();
  attn->add_option("--shift", at.shift, "Shift offset S")->required();
  attn->add_option("--window", at.window, "Local window W")->required();
  attn->add_option("--seed", at.seed, "Input seed");
  attn->add_option("--dtype", at.dtype, "single or double")->check(CLI::IsMember({"single", "double"}));

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Time naive vs decomposed attention");
  bench->add_option("--lens", bn.lens, "Comma-separated ascending lengths")->required();
  bench->add_option("--dim", bn.dim, "Head dimension");
  bench->add_option("--shift-frac", bn.shift_frac, "S as a fraction of L, e.g. 1/3 or 0.5");
  bench->add_option("--window", bn.window, "Local window W")->check(CLI::NonNegativeNumber);
  bench->add_option("--repeats", bn.repeats, "Timed repetitions per length (>= 3)");
  bench->add_option("--out", bn.out, "Output CSV")->required();

  ModelArgs md;
  auto* model = app.add_subcommand("model-run", "Run the seeded toy transformer");
  model->add_option("--layers", md.cfg.layers, "Layers")->check(CLI::PositiveNumber);
  model->add_option("--heads", md.cfg.heads, "Heads")->check(CLI::PositiveNumber);
  model->add_option("--dmodel", md.cfg.d_model, "Model width")->check(CLI::PositiveNumber);
  model->add_option("--vocab", md.cfg.vocab, "Vocabulary size")->check(CLI::PositiveNumber);
  model->add_option("--len", md.cfg.seq_len, "Sequence length")->check(CLI::Range(2, 1 << 20));
  model->add_option("--seed", md.cfg.seed, "Weight and token seed");
  model->add_option("--mode", md.mode, "rope, string or naive-string")
      ->check(CLI::IsMember({"rope", "string", "naive-string"}));
  model->add_option("--shift", md.shift, "Shift offset S (default L/3)");
  model->add_option("--window", md.window, "Local window W (default min(128, S-1))");
  model->add_flag("--compare", md.compare, "Run string and naive-string and compare logits");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*posmap) return run_posmap(pm, out, err);
    if (*freq) return run_freq(fq, out);
    if (*attn) return at.dtype == "single" ? run_attn_check<float>(at, out) : run_attn_check<double>(at, out);
    if (*bench) return run_bench(bn, out);
    if (*model) return run_model(md, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace string_rope
