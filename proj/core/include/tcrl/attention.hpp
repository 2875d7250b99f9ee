#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcrl/rng.hpp"

namespace tcrl {

// The five roles, in the order they must appear within a segment.
enum class TokenRole { kVisionState, kInstruction, kArAction, kCrlAction, kCrlGoal };

TokenRole role_from_string(const std::string& name);
std::string role_to_string(TokenRole role);

// One or more samples laid out back to back. Within a segment the roles run
// VisionState* Instruction* ArAction* CrlAction* CrlGoal*; attention never
// crosses segment boundaries.
struct PackedSequence {
  int feature_dim = 0;
  std::vector<double> features;  // [n][feature_dim]
  std::vector<TokenRole> roles;
  std::vector<int> segment_ids;  // non-decreasing
  std::vector<int> positions;    // index within the segment
  std::vector<int> ar_targets;   // next-token target at ArAction positions, else -1

  int length() const { return static_cast<int>(roles.size()); }
  std::span<const double> token(int i) const {
    return {features.data() + static_cast<size_t>(i) * feature_dim,
            static_cast<size_t>(feature_dim)};
  }
};

// Builds one segment from (role, count) runs with seeded features and
// ArAction targets drawn from [0, vocab).
PackedSequence make_segment(const std::vector<std::pair<TokenRole, int>>& runs, int feature_dim,
                            int vocab, Rng& rng);

struct RoleMask {
  int n = 0;
  std::vector<char> permission;  // [query][key]

  bool allowed(int q, int k) const { return permission[static_cast<size_t>(q) * n + k] != 0; }
  char& ref(int q, int k) { return permission[static_cast<size_t>(q) * n + k]; }
};

// Permission rules, all restricted to the same segment and key position <=
// query position:
//   VisionState, Instruction -> VisionState, Instruction
//   ArAction                 -> VisionState, Instruction, ArAction
//   CrlAction                -> VisionState, CrlAction
//   CrlGoal                  -> CrlGoal
// Throws ValidationError naming the first position whose role order or
// segment numbering is malformed.
RoleMask build_mask(const PackedSequence& seq);

// Single multi-head scaled-dot-product attention layer plus a vocabulary
// projection for next-token logits.
struct AttentionParams {
  int model_dim = 0;
  int num_heads = 1;
  int vocab = 0;
  std::vector<double> wq, wk, wv, wo;  // [model_dim][model_dim]
  std::vector<double> w_vocab;         // [vocab][model_dim]
};

AttentionParams init_attention(int model_dim, int num_heads, int vocab, double sigma,
                               uint64_t seed);

// Reference evaluator: full score matrix, softmax over permitted keys only.
// Returns [n][model_dim] outputs. Throws on a fully masked query row.
std::vector<double> dense_attention(const PackedSequence& seq, const RoleMask& mask,
                                    const AttentionParams& params);

enum class BlockStatus { kSkip, kPartial, kFull };

struct BlockEntry {
  int query_block = 0;
  int key_block = 0;
  BlockStatus status = BlockStatus::kSkip;
};

// Block classification of the mask: skip if every pair is blocked, full if
// every in-range pair is permitted, partial otherwise. Skip entries are
// included in the listing so the layout reconstructs the dense mask exactly.
std::vector<BlockEntry> block_layout(const RoleMask& mask, int block_size);

struct BlockSparseResult {
  std::vector<double> out;  // [n][model_dim]
  int blocks_total = 0;
  int blocks_skipped = 0;
  double skipped_fraction = 0.0;
};

// Streams key blocks with an online softmax, touching only non-skip blocks.
// Matches dense_attention to <= 1e-12 elementwise.
BlockSparseResult block_sparse_attention(const PackedSequence& seq, const RoleMask& mask,
                                         const AttentionParams& params, int block_size);

// Greedy first-fit packing of single-segment sequences. Throws
// ValidationError naming the length of any sample exceeding the limit.
std::vector<PackedSequence> pack(const std::vector<PackedSequence>& samples, int limit);

// Mean next-token cross-entropy over ArAction positions, whole sequence and
// per segment (segments with no ArAction targets report 0).
double bc_loss_packed(const PackedSequence& seq, const RoleMask& mask,
                      const AttentionParams& params);
std::vector<double> per_segment_bc_loss(const PackedSequence& seq, const RoleMask& mask,
                                        const AttentionParams& params);

struct IsolationReport {
  bool passed = false;
  double instruction_to_crl_action = 0.0;  // rule (a) max diff
  double any_to_crl_goal = 0.0;            // rule (b) max diff
  double crl_removal = 0.0;                // rule (c) max diff incl. BC loss delta
  std::string failure;                     // names (query role, perturbed role) when failing
};

// Executes the three leakage probes against an explicit mask so corrupted
// masks are detectable: (a) randomized Instruction features must not move
// CrlAction outputs, (b) randomizing everything except CrlGoal must not move
// CrlGoal outputs, (c) deleting both Crl blocks must not move the remaining
// outputs or the BC loss.
IsolationReport isolation_check(const PackedSequence& seq, const AttentionParams& params,
                                const RoleMask& mask, Rng& rng, double tol = 1e-12);

struct MaskBenchConfig {
  std::vector<int> seq_lens{512, 1024, 2048, 4096};
  int block_size = 64;
  int model_dim = 64;
  int num_heads = 4;
  int warmup = 3;
  int reps = 5;
  uint64_t seed = 1;
};

struct MaskBenchRow {
  std::string impl;  // "dense" or "block"
  int seq_len = 0;
  int block_size = 0;
  long long median_ns = 0;
  double skipped_fraction = 0.0;
};

// Single-threaded dense vs block-sparse timing over role-masked packed
// sequences; medians exclude warmup.
std::vector<MaskBenchRow> mask_bench(const MaskBenchConfig& config);

// Role-structured packed sequence of roughly the requested length for
// benches and property tests; Crl blocks take about a quarter of each
// segment.
PackedSequence bench_sequence(int target_len, int feature_dim, int vocab, Rng& rng);

struct RoleRun {
  TokenRole role;
  int count = 0;
};

struct MaskDump {
  int num_tokens = 0;
  int block_size = 0;
  std::vector<std::vector<RoleRun>> segments;
  std::vector<BlockEntry> layout;
};

// Text dump of the mask structure: per-segment role run-lengths plus the
// block layout. parse(dump(x)) reproduces the structure exactly.
std::string dump_mask(const PackedSequence& seq, const RoleMask& mask, int block_size);
MaskDump parse_mask_dump(const std::string& text);

}  // namespace tcrl
