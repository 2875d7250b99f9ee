#include "tcrl/attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tcrl/contrastive.hpp"
#include "tcrl/errors.hpp"

namespace tcrl {

TokenRole role_from_string(const std::string& name) {
  if (name == "VisionState") return TokenRole::kVisionState;
  if (name == "Instruction") return TokenRole::kInstruction;
  if (name == "ArAction") return TokenRole::kArAction;
  if (name == "CrlAction") return TokenRole::kCrlAction;
  if (name == "CrlGoal") return TokenRole::kCrlGoal;
  throw ValidationError("unknown token role: " + name);
}

std::string role_to_string(TokenRole role) {
  switch (role) {
    case TokenRole::kVisionState: return "VisionState";
    case TokenRole::kInstruction: return "Instruction";
    case TokenRole::kArAction: return "ArAction";
    case TokenRole::kCrlAction: return "CrlAction";
    case TokenRole::kCrlGoal: return "CrlGoal";
  }
  throw ValidationError("unknown token role enum value");
}

PackedSequence make_segment(const std::vector<std::pair<TokenRole, int>>& runs, int feature_dim,
                            int vocab, Rng& rng) {
  PackedSequence seq;
  seq.feature_dim = feature_dim;
  int pos = 0;
  for (const auto& [role, count] : runs) {
    for (int i = 0; i < count; ++i) {
      seq.roles.push_back(role);
      seq.segment_ids.push_back(0);
      seq.positions.push_back(pos++);
      seq.ar_targets.push_back(role == TokenRole::kArAction && vocab > 0
                                   ? rng.uniform_int(vocab)
                                   : -1);
      for (int d = 0; d < feature_dim; ++d) seq.features.push_back(rng.normal());
    }
  }
  return seq;
}

namespace {

void validate_sequence(const PackedSequence& seq) {
  const size_t n = seq.roles.size();
  if (n == 0) throw ValidationError("sequence: empty");
  if (seq.segment_ids.size() != n || seq.positions.size() != n || seq.ar_targets.size() != n ||
      seq.features.size() != n * static_cast<size_t>(seq.feature_dim))
    throw ValidationError("sequence: field lengths disagree");
  for (size_t i = 1; i < n; ++i) {
    if (seq.segment_ids[i] < seq.segment_ids[i - 1])
      throw ValidationError("sequence: segment ids decrease at position " + std::to_string(i));
    bool same = seq.segment_ids[i] == seq.segment_ids[i - 1];
    if (same && seq.positions[i] != seq.positions[i - 1] + 1)
      throw ValidationError("sequence: positions not consecutive at position " +
                            std::to_string(i));
    if (same && static_cast<int>(seq.roles[i]) < static_cast<int>(seq.roles[i - 1]))
      throw ValidationError("sequence: role order violated at position " + std::to_string(i) +
                            " (" + role_to_string(seq.roles[i]) + " after " +
                            role_to_string(seq.roles[i - 1]) + ")");
  }
  if (seq.positions[0] != 0) throw ValidationError("sequence: first position must be 0");
  for (size_t i = 1; i < n; ++i)
    if (seq.segment_ids[i] != seq.segment_ids[i - 1] && seq.positions[i] != 0)
      throw ValidationError("sequence: segment at position " + std::to_string(i) +
                            " does not start at position 0");
}

bool role_permits(TokenRole q, TokenRole k) {
  switch (q) {
    case TokenRole::kVisionState:
    case TokenRole::kInstruction:
      return k == TokenRole::kVisionState || k == TokenRole::kInstruction;
    case TokenRole::kArAction:
      return k == TokenRole::kVisionState || k == TokenRole::kInstruction ||
             k == TokenRole::kArAction;
    case TokenRole::kCrlAction:
      return k == TokenRole::kVisionState || k == TokenRole::kCrlAction;
    case TokenRole::kCrlGoal:
      return k == TokenRole::kCrlGoal;
  }
  return false;
}

}  // namespace

RoleMask build_mask(const PackedSequence& seq) {
  validate_sequence(seq);
  const int n = seq.length();
  RoleMask mask;
  mask.n = n;
  mask.permission.assign(static_cast<size_t>(n) * n, 0);
  for (int q = 0; q < n; ++q) {
    for (int k = 0; k <= q; ++k) {
      if (seq.segment_ids[k] != seq.segment_ids[q]) continue;
      if (role_permits(seq.roles[q], seq.roles[k])) mask.ref(q, k) = 1;
    }
  }
  return mask;
}

AttentionParams init_attention(int model_dim, int num_heads, int vocab, double sigma,
                               uint64_t seed) {
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0)
    throw ValidationError("attention: model_dim must be a positive multiple of num_heads");
  AttentionParams p;
  p.model_dim = model_dim;
  p.num_heads = num_heads;
  p.vocab = vocab;
  Rng rng(seed);
  auto fill = [&](std::vector<double>& w, size_t count) {
    w.resize(count);
    for (double& v : w) v = sigma * rng.normal();
  };
  size_t dd = static_cast<size_t>(model_dim) * model_dim;
  fill(p.wq, dd);
  fill(p.wk, dd);
  fill(p.wv, dd);
  fill(p.wo, dd);
  fill(p.w_vocab, static_cast<size_t>(vocab) * model_dim);
  return p;
}

namespace {

// out[n][d] = x[n][d] * W^T (rows of W are output coordinates).
std::vector<double> project(const PackedSequence& seq, const std::vector<double>& w, int d) {
  const int n = seq.length();
  std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    std::span<const double> x = seq.token(i);
    double* row = out.data() + static_cast<size_t>(i) * d;
    for (int r = 0; r < d; ++r) {
      const double* wr = w.data() + static_cast<size_t>(r) * d;
      double s = 0.0;
      for (int ccol = 0; ccol < d; ++ccol) s += wr[ccol] * x[ccol];
      row[r] = s;
    }
  }
  return out;
}

std::vector<double> output_project(const std::vector<double>& ctx, const std::vector<double>& wo,
                                   int n, int d) {
  std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* x = ctx.data() + static_cast<size_t>(i) * d;
    double* row = out.data() + static_cast<size_t>(i) * d;
    for (int r = 0; r < d; ++r) {
      const double* wr = wo.data() + static_cast<size_t>(r) * d;
      double s = 0.0;
      for (int ccol = 0; ccol < d; ++ccol) s += wr[ccol] * x[ccol];
      row[r] = s;
    }
  }
  return out;
}

}  // namespace

std::vector<double> dense_attention(const PackedSequence& seq, const RoleMask& mask,
                                    const AttentionParams& params) {
  const int n = seq.length(), d = params.model_dim, heads = params.num_heads;
  const int hd = d / heads;
  if (seq.feature_dim != d) throw ValidationError("attention: feature_dim != model_dim");
  if (mask.n != n) throw ValidationError("attention: mask size mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double> q = project(seq, params.wq, d);
  std::vector<double> k = project(seq, params.wk, d);
  std::vector<double> v = project(seq, params.wv, d);
  std::vector<double> ctx(static_cast<size_t>(n) * d, 0.0);

  std::vector<int> keys;
  std::vector<double> scores;
  for (int qi = 0; qi < n; ++qi) {
    keys.clear();
    for (int ki = 0; ki < n; ++ki)
      if (mask.allowed(qi, ki)) keys.push_back(ki);
    if (keys.empty())
      throw ValidationError("attention: fully masked query row " + std::to_string(qi));
    for (int h = 0; h < heads; ++h) {
      const double* qrow = q.data() + static_cast<size_t>(qi) * d + h * hd;
      scores.resize(keys.size());
      double m = -std::numeric_limits<double>::infinity();
      for (size_t s = 0; s < keys.size(); ++s) {
        const double* krow = k.data() + static_cast<size_t>(keys[s]) * d + h * hd;
        double dotv = 0.0;
        for (int c = 0; c < hd; ++c) dotv += qrow[c] * krow[c];
        scores[s] = dotv * scale;
        m = std::max(m, scores[s]);
      }
      double denom = 0.0;
      for (double& s : scores) {
        s = std::exp(s - m);
        denom += s;
      }
      double* crow = ctx.data() + static_cast<size_t>(qi) * d + h * hd;
      for (size_t s = 0; s < keys.size(); ++s) {
        const double w = scores[s] / denom;
        const double* vrow = v.data() + static_cast<size_t>(keys[s]) * d + h * hd;
        for (int c = 0; c < hd; ++c) crow[c] += w * vrow[c];
      }
    }
  }
  return output_project(ctx, params.wo, n, d);
}

std::vector<BlockEntry> block_layout(const RoleMask& mask, int block_size) {
  if (block_size < 1) throw ValidationError("block_layout: block_size must be >= 1");
  const int n = mask.n;
  const int nb = (n + block_size - 1) / block_size;
  std::vector<BlockEntry> layout;
  layout.reserve(static_cast<size_t>(nb) * nb);
  for (int qb = 0; qb < nb; ++qb) {
    int q0 = qb * block_size, q1 = std::min(n, q0 + block_size);
    for (int kb = 0; kb < nb; ++kb) {
      int k0 = kb * block_size, k1 = std::min(n, k0 + block_size);
      bool any = false, all = true;
      for (int qi = q0; qi < q1; ++qi) {
        for (int ki = k0; ki < k1; ++ki) {
          if (mask.allowed(qi, ki)) any = true;
          else all = false;
        }
      }
      BlockStatus status = !any ? BlockStatus::kSkip
                                : (all ? BlockStatus::kFull : BlockStatus::kPartial);
      layout.push_back({qb, kb, status});
    }
  }
  return layout;
}

BlockSparseResult block_sparse_attention(const PackedSequence& seq, const RoleMask& mask,
                                         const AttentionParams& params, int block_size) {
  const int n = seq.length(), d = params.model_dim, heads = params.num_heads;
  const int hd = d / heads;
  if (seq.feature_dim != d) throw ValidationError("attention: feature_dim != model_dim");
  if (mask.n != n) throw ValidationError("attention: mask size mismatch");
  if (block_size < 1) throw ValidationError("attention: block_size must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int nb = (n + block_size - 1) / block_size;

  std::vector<BlockEntry> layout = block_layout(mask, block_size);
  std::vector<double> q = project(seq, params.wq, d);
  std::vector<double> k = project(seq, params.wk, d);
  std::vector<double> v = project(seq, params.wv, d);

  BlockSparseResult result;
  result.blocks_total = nb * nb;
  for (const BlockEntry& e : layout)
    if (e.status == BlockStatus::kSkip) ++result.blocks_skipped;
  result.skipped_fraction =
      result.blocks_total == 0 ? 0.0
                               : static_cast<double>(result.blocks_skipped) / result.blocks_total;

  std::vector<double> ctx(static_cast<size_t>(n) * d, 0.0);
  // Online softmax state per (row-in-block, head): running max, running
  // denominator, unnormalized context accumulator.
  std::vector<double> run_max, run_den, acc;
  for (int qb = 0; qb < nb; ++qb) {
    const int q0 = qb * block_size, q1 = std::min(n, q0 + block_size);
    const int rows = q1 - q0;
    run_max.assign(static_cast<size_t>(rows) * heads,
                   -std::numeric_limits<double>::infinity());
    run_den.assign(static_cast<size_t>(rows) * heads, 0.0);
    acc.assign(static_cast<size_t>(rows) * d, 0.0);

    for (int kb = 0; kb < nb; ++kb) {
      const BlockEntry& entry = layout[static_cast<size_t>(qb) * nb + kb];
      if (entry.status == BlockStatus::kSkip) continue;
      const bool full = entry.status == BlockStatus::kFull;
      const int k0 = kb * block_size, k1 = std::min(n, k0 + block_size);
      for (int qi = q0; qi < q1; ++qi) {
        const int r = qi - q0;
        for (int h = 0; h < heads; ++h) {
          const double* qrow = q.data() + static_cast<size_t>(qi) * d + h * hd;
          double* arow = acc.data() + static_cast<size_t>(r) * d + h * hd;
          double& m = run_max[static_cast<size_t>(r) * heads + h];
          double& den = run_den[static_cast<size_t>(r) * heads + h];
          for (int ki = k0; ki < k1; ++ki) {
            if (!full && !mask.allowed(qi, ki)) continue;
            const double* krow = k.data() + static_cast<size_t>(ki) * d + h * hd;
            double dotv = 0.0;
            for (int c = 0; c < hd; ++c) dotv += qrow[c] * krow[c];
            double score = dotv * scale;
            const double* vrow = v.data() + static_cast<size_t>(ki) * d + h * hd;
            if (score <= m) {
              double w = std::exp(score - m);
              den += w;
              for (int c = 0; c < hd; ++c) arow[c] += w * vrow[c];
            } else {
              double shift = m == -std::numeric_limits<double>::infinity()
                                 ? 0.0
                                 : std::exp(m - score);
              den = den * shift + 1.0;
              for (int c = 0; c < hd; ++c) arow[c] = arow[c] * shift + vrow[c];
              m = score;
            }
          }
        }
      }
    }

    for (int qi = q0; qi < q1; ++qi) {
      const int r = qi - q0;
      for (int h = 0; h < heads; ++h) {
        double den = run_den[static_cast<size_t>(r) * heads + h];
        if (den == 0.0)
          throw ValidationError("attention: fully masked query row " + std::to_string(qi));
        const double* arow = acc.data() + static_cast<size_t>(r) * d + h * hd;
        double* crow = ctx.data() + static_cast<size_t>(qi) * d + h * hd;
        for (int c = 0; c < hd; ++c) crow[c] = arow[c] / den;
      }
    }
  }
  result.out = output_project(ctx, params.wo, n, d);
  return result;
}

std::vector<PackedSequence> pack(const std::vector<PackedSequence>& samples, int limit) {
  if (limit < 1) throw ValidationError("pack: limit must be >= 1");
  std::vector<PackedSequence> bins;
  std::vector<int> used;
  for (const PackedSequence& s : samples) {
    validate_sequence(s);
    if (s.segment_ids.front() != s.segment_ids.back())
      throw ValidationError("pack: input samples must be single-segment");
    if (s.length() > limit)
      throw ValidationError("pack: sample of length " + std::to_string(s.length()) +
                            " exceeds the limit " + std::to_string(limit));
    int target = -1;
    for (size_t b = 0; b < bins.size(); ++b) {
      if (used[b] + s.length() <= limit) {
        target = static_cast<int>(b);
        break;
      }
    }
    if (target < 0) {
      bins.emplace_back();
      bins.back().feature_dim = s.feature_dim;
      used.push_back(0);
      target = static_cast<int>(bins.size()) - 1;
    }
    PackedSequence& bin = bins[target];
    if (bin.feature_dim != s.feature_dim)
      throw ValidationError("pack: feature dimensions differ across samples");
    int next_segment = bin.roles.empty() ? 0 : bin.segment_ids.back() + 1;
    for (int i = 0; i < s.length(); ++i) {
      bin.roles.push_back(s.roles[i]);
      bin.segment_ids.push_back(next_segment);
      bin.positions.push_back(s.positions[i]);
      bin.ar_targets.push_back(s.ar_targets[i]);
    }
    bin.features.insert(bin.features.end(), s.features.begin(), s.features.end());
    used[target] += s.length();
  }
  return bins;
}

namespace {

struct BcRows {
  std::vector<double> logits;  // [rows][vocab]
  std::vector<int> targets;
  std::vector<int> token_index;
};

BcRows bc_rows(const PackedSequence& seq, const std::vector<double>& out,
               const AttentionParams& params) {
  BcRows rows;
  const int d = params.model_dim;
  for (int i = 0; i < seq.length(); ++i) {
    if (seq.ar_targets[i] < 0) continue;
    rows.targets.push_back(seq.ar_targets[i]);
    rows.token_index.push_back(i);
    const double* orow = out.data() + static_cast<size_t>(i) * d;
    for (int t = 0; t < params.vocab; ++t) {
      const double* wrow = params.w_vocab.data() + static_cast<size_t>(t) * d;
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += wrow[c] * orow[c];
      rows.logits.push_back(s);
    }
  }
  return rows;
}

}  // namespace

double bc_loss_packed(const PackedSequence& seq, const RoleMask& mask,
                      const AttentionParams& params) {
  std::vector<double> out = dense_attention(seq, mask, params);
  BcRows rows = bc_rows(seq, out, params);
  if (rows.targets.empty()) return 0.0;
  return bc_token_loss(rows.logits, static_cast<int>(rows.targets.size()), params.vocab,
                       rows.targets)
      .loss;
}

std::vector<double> per_segment_bc_loss(const PackedSequence& seq, const RoleMask& mask,
                                        const AttentionParams& params) {
  std::vector<double> out = dense_attention(seq, mask, params);
  BcRows rows = bc_rows(seq, out, params);
  // Dense re-index of segment ids in order of appearance.
  std::vector<int> dense_segment(seq.length());
  int num_segments = 0;
  for (int t = 0; t < seq.length(); ++t) {
    if (t > 0 && seq.segment_ids[t] != seq.segment_ids[t - 1]) ++num_segments;
    dense_segment[t] = num_segments;
  }
  ++num_segments;
  std::vector<double> sums(num_segments, 0.0);
  std::vector<int> counts(num_segments, 0);
  for (size_t r = 0; r < rows.targets.size(); ++r) {
    std::span<const double> row(rows.logits.data() + r * params.vocab,
                                static_cast<size_t>(params.vocab));
    double m = row[0];
    for (double x : row) m = std::max(m, x);
    double s = 0.0;
    for (double x : row) s += std::exp(x - m);
    double lse = m + std::log(s);
    int seg = dense_segment[rows.token_index[r]];
    sums[seg] += lse - row[rows.targets[r]];
    counts[seg] += 1;
  }
  for (int g = 0; g < num_segments; ++g)
    if (counts[g] > 0) sums[g] /= counts[g];
  return sums;
}

namespace {

double max_abs_diff_at(const std::vector<double>& a, const std::vector<double>& b, int d,
                       const std::vector<int>& positions) {
  double worst = 0.0;
  for (int i : positions)
    for (int c = 0; c < d; ++c)
      worst = std::max(worst, std::fabs(a[static_cast<size_t>(i) * d + c] -
                                        b[static_cast<size_t>(i) * d + c]));
  return worst;
}

}  // namespace

IsolationReport isolation_check(const PackedSequence& seq, const AttentionParams& params,
                                const RoleMask& mask, Rng& rng, double tol) {
  const int d = params.model_dim;
  std::vector<double> base = dense_attention(seq, mask, params);

  std::vector<int> crl_action_pos, crl_goal_pos, kept_pos;
  for (int i = 0; i < seq.length(); ++i) {
    if (seq.roles[i] == TokenRole::kCrlAction) crl_action_pos.push_back(i);
    else if (seq.roles[i] == TokenRole::kCrlGoal) crl_goal_pos.push_back(i);
    else kept_pos.push_back(i);
  }

  IsolationReport report;

  // (a) Instruction features must not reach CrlAction outputs.
  {
    PackedSequence probe = seq;
    for (int i = 0; i < probe.length(); ++i)
      if (probe.roles[i] == TokenRole::kInstruction)
        for (int c = 0; c < d; ++c)
          probe.features[static_cast<size_t>(i) * d + c] = rng.normal();
    std::vector<double> out = dense_attention(probe, mask, params);
    report.instruction_to_crl_action = max_abs_diff_at(base, out, d, crl_action_pos);
    if (report.instruction_to_crl_action > tol)
      report.failure = "(query role CrlAction, perturbed role Instruction)";
  }

  // (b) Nothing outside the CrlGoal block may reach CrlGoal outputs.
  {
    PackedSequence probe = seq;
    for (int i = 0; i < probe.length(); ++i)
      if (probe.roles[i] != TokenRole::kCrlGoal)
        for (int c = 0; c < d; ++c)
          probe.features[static_cast<size_t>(i) * d + c] = rng.normal();
    std::vector<double> out = dense_attention(probe, mask, params);
    report.any_to_crl_goal = max_abs_diff_at(base, out, d, crl_goal_pos);
    if (report.any_to_crl_goal > tol && report.failure.empty())
      report.failure = "(query role CrlGoal, perturbed role non-CrlGoal)";
  }

  // (c) Deleting both Crl blocks must leave the other outputs and the BC loss
  // alone. The reduced mask is rebuilt from the rules, so an extra permitted
  // pair in the supplied mask shows up as a diff here.
  {
    PackedSequence reduced;
    reduced.feature_dim = seq.feature_dim;
    for (int i : kept_pos) {
      reduced.roles.push_back(seq.roles[i]);
      reduced.segment_ids.push_back(seq.segment_ids[i]);
      reduced.positions.push_back(seq.positions[i]);
      reduced.ar_targets.push_back(seq.ar_targets[i]);
      std::span<const double> x = seq.token(i);
      reduced.features.insert(reduced.features.end(), x.begin(), x.end());
    }
    RoleMask reduced_mask = build_mask(reduced);
    std::vector<double> out = dense_attention(reduced, reduced_mask, params);
    double worst = 0.0;
    for (size_t r = 0; r < kept_pos.size(); ++r)
      for (int c = 0; c < d; ++c)
        worst = std::max(worst, std::fabs(base[static_cast<size_t>(kept_pos[r]) * d + c] -
                                          out[r * d + c]));
    BcRows full_rows = bc_rows(seq, base, params);
    if (!full_rows.targets.empty()) {
      double bc_full = bc_token_loss(full_rows.logits, static_cast<int>(full_rows.targets.size()),
                                     params.vocab, full_rows.targets)
                           .loss;
      double bc_reduced = bc_loss_packed(reduced, reduced_mask, params);
      worst = std::max(worst, std::fabs(bc_full - bc_reduced));
    }
    report.crl_removal = worst;
    if (worst > tol && report.failure.empty())
      report.failure = "(query role VisionState/Instruction/ArAction, perturbed role Crl-removal)";
  }

  report.passed = report.instruction_to_crl_action <= tol && report.any_to_crl_goal <= tol &&
                  report.crl_removal <= tol;
  return report;
}

PackedSequence bench_sequence(int target_len, int feature_dim, int vocab, Rng& rng) {
  // 64-token segments, Crl blocks at 25%.
  const std::vector<std::pair<TokenRole, int>> runs = {{TokenRole::kVisionState, 24},
                                                       {TokenRole::kInstruction, 8},
                                                       {TokenRole::kArAction, 16},
                                                       {TokenRole::kCrlAction, 10},
                                                       {TokenRole::kCrlGoal, 6}};
  if (target_len < 64) throw ValidationError("bench_sequence: target length must be >= 64");
  std::vector<PackedSequence> segments;
  for (int have = 0; have + 64 <= target_len; have += 64)
    segments.push_back(make_segment(runs, feature_dim, vocab, rng));
  return pack(segments, target_len)[0];
}

std::vector<MaskBenchRow> mask_bench(const MaskBenchConfig& config) {
  if (config.warmup < 3) throw ValidationError("mask_bench: warmup must be >= 3");
  if (config.reps < 1) throw ValidationError("mask_bench: reps must be >= 1");
  Rng rng(config.seed);
  AttentionParams params =
      init_attention(config.model_dim, config.num_heads, 8, 0.05, config.seed);

  std::vector<MaskBenchRow> rows;
  double sink = 0.0;
  for (int len : config.seq_lens) {
    PackedSequence seq = bench_sequence(len, config.model_dim, 8, rng);
    RoleMask mask = build_mask(seq);

    auto time_median = [&](auto&& fn) {
      for (int i = 0; i < config.warmup; ++i) fn();
      std::vector<long long> ns;
      for (int i = 0; i < config.reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
      }
      std::sort(ns.begin(), ns.end());
      return ns[ns.size() / 2];
    };

    long long dense_ns = time_median([&] {
      std::vector<double> out = dense_attention(seq, mask, params);
      sink += out[0];
    });
    double skipped = 0.0;
    long long block_ns = time_median([&] {
      BlockSparseResult r = block_sparse_attention(seq, mask, params, config.block_size);
      skipped = r.skipped_fraction;
      sink += r.out[0];
    });
    rows.push_back({"dense", len, config.block_size, dense_ns, 0.0});
    rows.push_back({"block", len, config.block_size, block_ns, skipped});
  }
  if (!std::isfinite(sink)) throw NumericError("mask_bench: non-finite attention output");
  return rows;
}

std::string dump_mask(const PackedSequence& seq, const RoleMask& mask, int block_size) {
  validate_sequence(seq);
  if (mask.n != seq.length()) throw ValidationError("dump_mask: mask size mismatch");
  std::ostringstream out;
  int num_segments = 1;
  for (int t = 1; t < seq.length(); ++t)
    if (seq.segment_ids[t] != seq.segment_ids[t - 1]) ++num_segments;
  out << "tcrl-mask 1\n";
  out << "tokens " << seq.length() << " block_size " << block_size << " segments "
      << num_segments << "\n";
  int i = 0;
  for (int seg = 0; i < seq.length(); ++seg) {
    out << "segment " << seg;
    int seg_id = seq.segment_ids[i];
    while (i < seq.length() && seq.segment_ids[i] == seg_id) {
      TokenRole role = seq.roles[i];
      int count = 0;
      while (i < seq.length() && seq.segment_ids[i] == seg_id && seq.roles[i] == role) {
        ++count;
        ++i;
      }
      out << " " << role_to_string(role) << " " << count;
    }
    out << "\n";
  }
  std::vector<BlockEntry> layout = block_layout(mask, block_size);
  out << "blocks " << layout.size() << "\n";
  for (const BlockEntry& e : layout) {
    const char* status = e.status == BlockStatus::kSkip
                             ? "skip"
                             : (e.status == BlockStatus::kFull ? "full" : "partial");
    out << e.query_block << " " << e.key_block << " " << status << "\n";
  }
  out << "end\n";
  return out.str();
}

MaskDump parse_mask_dump(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ValidationError("parse_mask_dump: truncated dump");
    return line;
  };

  {
    std::istringstream h(next_line());
    std::string magic;
    int version = 0;
    h >> magic >> version;
    if (magic != "tcrl-mask" || version != 1)
      throw ValidationError("parse_mask_dump: bad header line '" + line + "'");
  }

  MaskDump dump;
  int num_segments = 0;
  {
    std::istringstream h(next_line());
    std::string kw1, kw2, kw3;
    h >> kw1 >> dump.num_tokens >> kw2 >> dump.block_size >> kw3 >> num_segments;
    if (!h || kw1 != "tokens" || kw2 != "block_size" || kw3 != "segments")
      throw ValidationError("parse_mask_dump: bad size line '" + line + "'");
  }

  int counted = 0;
  for (int s = 0; s < num_segments; ++s) {
    std::istringstream ls(next_line());
    std::string kw;
    int idx = -1;
    ls >> kw >> idx;
    if (kw != "segment" || idx != s)
      throw ValidationError("parse_mask_dump: bad segment line '" + line + "'");
    dump.segments.emplace_back();
    std::string word;
    int count = 0;
    while (ls >> word >> count) {
      if (count < 1) throw ValidationError("parse_mask_dump: bad run count in '" + line + "'");
      dump.segments.back().push_back({role_from_string(word), count});
      counted += count;
    }
    if (dump.segments.back().empty())
      throw ValidationError("parse_mask_dump: empty segment " + std::to_string(s));
  }
  if (counted != dump.num_tokens)
    throw ValidationError("parse_mask_dump: role runs cover " + std::to_string(counted) +
                          " tokens, header says " + std::to_string(dump.num_tokens));

  size_t num_blocks = 0;
  {
    std::istringstream h(next_line());
    std::string kw;
    h >> kw >> num_blocks;
    if (!h || kw != "blocks")
      throw ValidationError("parse_mask_dump: bad blocks line '" + line + "'");
  }
  for (size_t b = 0; b < num_blocks; ++b) {
    std::istringstream ls(next_line());
    BlockEntry e;
    std::string status;
    if (!(ls >> e.query_block >> e.key_block >> status))
      throw ValidationError("parse_mask_dump: bad block line '" + line + "'");
    if (status == "skip") e.status = BlockStatus::kSkip;
    else if (status == "full") e.status = BlockStatus::kFull;
    else if (status == "partial") e.status = BlockStatus::kPartial;
    else throw ValidationError("parse_mask_dump: unknown block status " + status);
    dump.layout.push_back(e);
  }
  if (next_line() != "end") throw ValidationError("parse_mask_dump: missing end marker");
  return dump;
}

}  // namespace tcrl
