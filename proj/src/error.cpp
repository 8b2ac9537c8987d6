#include "cgat/error.hpp"

namespace cgat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_file: return "MalformedFile";
    case ErrorCode::non_triangle_face: return "NonTriangleFace";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::target_too_large: return "TargetTooLarge";
    case ErrorCode::non_manifold_input: return "NonManifoldInput";
    case ErrorCode::degenerate_mesh: return "DegenerateMesh";
    case ErrorCode::decimation_stalled: return "DecimationStalled";
    case ErrorCode::constant_channel: return "ConstantChannel";
    case ErrorCode::feature_length_mismatch: return "FeatureLengthMismatch";
    case ErrorCode::mixed_mode_batch: return "MixedModeBatch";
    case ErrorCode::mixed_feature_width: return "MixedFeatureWidth";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::empty_segment: return "EmptySegment";
    case ErrorCode::label_out_of_range: return "LabelOutOfRange";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::config_mismatch: return "ConfigMismatch";
    case ErrorCode::cls_node_present: return "CLSNodePresent";
    case ErrorCode::inconsistent_edges: return "InconsistentEdges";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::empty_class: return "EmptyClass";
    case ErrorCode::empty_eval_set: return "EmptyEvalSet";
    case ErrorCode::invalid_params: return "InvalidParams";
    case ErrorCode::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace cgat
