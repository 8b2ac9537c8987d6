#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgat {

enum class ErrorCode {
  malformed_file,
  non_triangle_face,
  index_out_of_range,
  io_failure,
  target_too_large,
  non_manifold_input,
  degenerate_mesh,
  decimation_stalled,
  constant_channel,
  feature_length_mismatch,
  mixed_mode_batch,
  mixed_feature_width,
  shape_mismatch,
  non_finite,
  empty_segment,
  label_out_of_range,
  invalid_config,
  config_mismatch,
  cls_node_present,
  inconsistent_edges,
  dimension_mismatch,
  empty_class,
  empty_eval_set,
  invalid_params,
  invalid_argument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace cgat
