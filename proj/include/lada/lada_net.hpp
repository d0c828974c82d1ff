#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "lada/classdist.hpp"
#include "lada/ndnum/mlp.hpp"

namespace lada {

struct ModelDims {
  std::size_t feature_dim = 64;
  std::size_t encoding_dim = 128;
  std::size_t num_classes = 11;  // K+1
  std::vector<std::size_t> generator_hidden{256, 128, 64};

  std::size_t generator_input() const { return encoding_dim + num_classes; }
  std::size_t generator_output() const { return generator_hidden.back(); }
  void validate() const;
};

/// Column of the discriminator head that means "source".
inline constexpr int kSourceColumn = 1;
inline constexpr int kTargetColumn = 0;

/// The six LADA networks. The generator is the trunk shared by the
/// discriminator and auxiliary heads; the classifier reads encodings only.
struct LadaModel {
  ModelDims dims;
  Mlp source_encoder;
  Mlp target_encoder;
  Mlp classifier;
  Mlp generator;
  Mlp discriminator;
  Mlp auxiliary;

  /// Re-initializes the target encoder as a deep copy of the source encoder.
  void copy_source_to_target() { target_encoder = source_encoder; }
};

LadaModel init_model(const ModelDims& dims, Rng& rng);

enum class CodePolicy { Zero, Uniform, SourceDist, Estimated, CoupledLabel };

std::string_view to_string(CodePolicy policy);

struct LatentCodeBatch {
  Matrix codes;  // m x (K+1); one-hot rows, all-zero for the Zero policy
  CodePolicy policy = CodePolicy::Zero;

  Eigen::Index size() const { return codes.rows(); }
};

/// Optional inputs some policies require.
struct CodeInputs {
  std::span<const int> labels{};               // CoupledLabel
  const ClassDistribution* distribution = nullptr;  // SourceDist, Estimated
};

/// Throws ErrorKind::Policy when a policy's required input is missing.
LatentCodeBatch sample_codes(CodePolicy policy, std::size_t m, std::size_t num_classes, Rng& rng,
                             const CodeInputs& inputs = {});

/// One-hot code matrix for a fixed class.
LatentCodeBatch constant_code(std::size_t m, std::size_t num_classes, int k);

/// Generator input [encoded, codes].
Matrix concat_codes(const Matrix& encoded, const Matrix& codes);

/// Forward through G, D and Q; the stacks are kept for backpropagation.
struct AdversarialPass {
  ActivationStack generator;
  ActivationStack discriminator;
  ActivationStack auxiliary;

  const Matrix& g() const { return generator.output; }
  const Matrix& d_probs() const { return discriminator.output; }
  const Matrix& q_probs() const { return auxiliary.output; }
};

struct PassMode {
  double dropout_p = 0.0;
  Rng* rng = nullptr;
  bool train = false;
};

AdversarialPass adversarial_forward(const LadaModel& model, const Matrix& encoded, const LatentCodeBatch& codes,
                                    const PassMode& mode = {});

/// Eval-mode encodings.
Matrix encode_source(const LadaModel& model, const Matrix& x);
Matrix encode_target(const LadaModel& model, const Matrix& x);

/// C(E_t(x)), eval mode.
Matrix classify_target(const LadaModel& model, const Matrix& x_target);
/// C(E_s(x)), eval mode.
Matrix classify_source(const LadaModel& model, const Matrix& x_source);

/// Q(. | G[E_t(x), c]) for the supplied codes, eval mode.
Matrix q_predict_target(const LadaModel& model, const Matrix& x_target, const LatentCodeBatch& codes);

/// Expectation of q_predict_target over codes drawn from `prior`:
/// sum_c prior(c) Q(. | G[E_t(x), e_c]).
Matrix q_predict_marginal(const LadaModel& model, const Matrix& x_target, const ClassDistribution& prior);

/// Elementwise mean of two row-stochastic predictions.
Matrix fuse_predictions(const Matrix& p_classifier, const Matrix& p_auxiliary);

/// Binary checkpoint; the layout is documented in docs/checkpoint-format.md.
void save_checkpoint(const LadaModel& model, const std::filesystem::path& path);
LadaModel load_checkpoint(const std::filesystem::path& path);

}  // namespace lada
