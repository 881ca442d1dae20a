#include "stream/verify/suites.hpp"

namespace stream::verify {

const std::vector<ManifestEntry>& invariant_manifest() {
  using enum Coverage;
  static const std::vector<ManifestEntry> entries = {
      {"ssm-core", "run_sequential matches the kernel oracle", asserted, {"ssm.oracle_equivalence"}},
      {"ssm-core", "perturbing u_j only changes y_k for k >= j", asserted,
       {"ssm.causality_past_unchanged", "ssm.causality_present_changes"}},
      {"ssm-core", "zero gaps reduce to projected cumulative sums", asserted, {"ssm.zero_gap_cumulative_sum"}},
      {"ssm-core", "state magnitude is bounded by |h_0| + sum |b u|", asserted, {"ssm.stability_bound"}},
      {"ssm-core", "LTI outputs are invariant to translating all coordinates", asserted,
       {"ssm.lti_translation_invariance"}},
      {"ssm-core", "LTI outputs are invariant to scaling gaps by s and A by 1/s", asserted,
       {"ssm.lti_gap_scaling_covariance"}},
      {"ssm-core", "LTI kernel depends only on t_k - t_i", asserted, {"ssm.lti_kernel_depends_on_gap"}},
      {"scan", "combine is associative", asserted, {"scan.associativity"}},
      {"scan", "[1, 0] is a two-sided identity", asserted, {"scan.identity"}},
      {"scan", "scan_parallel matches scan_sequential for 1, 2, 4 and 8 workers", asserted,
       {"scan.parallel_matches_sequential", "scan.states_match_recurrence"}},
      {"scan", "adjoint gradients match finite differences for every parameter class", asserted,
       {"grad.siso_a", "grad.siso_delta", "grad.siso_b", "grad.siso_c", "grad.siso_u"}},
      {"scan", "scan_parallel does at most twice the sequential combines", asserted, {"scan.work_bound"}},
      {"stream-layer", "STREAM outputs react to gap scaling, mamba outputs do not", asserted,
       {"layer.stream_gap_sensitivity", "layer.mamba_gap_invariance"}},
      {"stream-layer", "duplicated coordinates give finite outputs and still contribute", asserted,
       {"layer.overlap_finite", "layer.overlap_gamma_positive", "layer.overlap_duplicates_contribute"}},
      {"stream-layer", "block and stack lengths follow the input and the schedule", asserted,
       {"layer.shape_contract"}},
      {"stream-layer", "block gradients match finite differences", asserted,
       {"grad.block_a", "grad.block_delta", "grad.block_b_projection", "grad.block_c_projection", "grad.block_gamma",
        "grad.block_io", "grad.block_features"}},
      {"stream-layer", "end-to-end gradients of a 2-block stack match finite differences", asserted,
       {"grad.stack_end_to_end"}},
      {"stream-layer", "order among equal coordinates affects the output", documented, {}},
      {"geometry-pipeline", "serialize_points is permutation invariant", asserted,
       {"geometry.serialize_permutation_invariant"}},
      {"geometry-pipeline", "each serialized segment has length N and is sorted on its axis", asserted,
       {"geometry.serialize_segments_sorted"}},
      {"geometry-pipeline", "fps matches the brute-force oracle and ignores input order", asserted,
       {"geometry.fps_matches_oracle", "geometry.fps_permutation_invariant"}},
      {"geometry-pipeline", "knn groups match the brute-force oracle", asserted, {"geometry.knn_matches_oracle"}},
      {"geometry-pipeline", "tokenize_events is injective on (x, y, polarity)", asserted,
       {"geometry.tokenize_injective"}},
      {"geometry-pipeline", "cutmix lambda lies in [0, 1] and equals the share of b events", asserted,
       {"geometry.cutmix_lambda_is_b_fraction", "geometry.cutmix_lambda_in_unit_interval"}},
      {"train", "equal seed and config give identical metrics", asserted, {"train.deterministic_metrics"}},
      {"train", "smoothed training loss decreases over the first 5 epochs", asserted, {"train.loss_decreases"}},
      {"train", "checkpoint round trip reproduces the logits", asserted, {"train.checkpoint_round_trip"}},
      {"cli", "every subcommand is deterministic under a fixed seed", harness, {}},
      {"cli", "verify --suite all covers this manifest", harness, {}},
  };
  return entries;
}

}  // namespace stream::verify
