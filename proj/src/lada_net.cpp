#include "lada/lada_net.hpp"

#include <string>

#include "lada/error.hpp"

namespace lada {

void ModelDims::validate() const {
  if (feature_dim == 0 || encoding_dim == 0) throw Error(ErrorKind::Spec, "model dims must be positive");
  if (num_classes < 2) throw Error(ErrorKind::Spec, "model needs at least two output classes");
  if (generator_hidden.empty()) throw Error(ErrorKind::Spec, "generator needs at least one hidden layer");
  for (std::size_t h : generator_hidden) {
    if (h == 0) throw Error(ErrorKind::Spec, "generator layer width must be positive");
  }
}

LadaModel init_model(const ModelDims& dims, Rng& rng) {
  dims.validate();
  LadaModel model;
  model.dims = dims;

  const LayerSpec encoder[] = {{dims.encoding_dim, Activation::ReLU, true}};
  model.source_encoder = Mlp::make(dims.feature_dim, encoder, rng);
  model.copy_source_to_target();

  const LayerSpec classifier[] = {{dims.num_classes, Activation::Softmax, false}};
  model.classifier = Mlp::make(dims.encoding_dim, classifier, rng);

  std::vector<LayerSpec> generator;
  for (std::size_t h : dims.generator_hidden) generator.push_back({h, Activation::ReLU, true});
  model.generator = Mlp::make(dims.generator_input(), generator, rng);

  const LayerSpec discriminator[] = {{2, Activation::Softmax, false}};
  model.discriminator = Mlp::make(dims.generator_output(), discriminator, rng);

  const LayerSpec auxiliary[] = {{dims.num_classes, Activation::Softmax, false}};
  model.auxiliary = Mlp::make(dims.generator_output(), auxiliary, rng);
  return model;
}

std::string_view to_string(CodePolicy policy) {
  switch (policy) {
    case CodePolicy::Zero: return "zero";
    case CodePolicy::Uniform: return "uniform";
    case CodePolicy::SourceDist: return "source-dist";
    case CodePolicy::Estimated: return "estimated";
    case CodePolicy::CoupledLabel: return "coupled-label";
  }
  return "unknown";
}

LatentCodeBatch sample_codes(CodePolicy policy, std::size_t m, std::size_t num_classes, Rng& rng,
                             const CodeInputs& inputs) {
  LatentCodeBatch batch;
  batch.policy = policy;
  batch.codes = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(num_classes));
  switch (policy) {
    case CodePolicy::Zero:
      break;
    case CodePolicy::Uniform: {
      std::uniform_int_distribution<std::size_t> pick(0, num_classes - 1);
      for (std::size_t i = 0; i < m; ++i) batch.codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pick(rng))) = 1.0;
      break;
    }
    case CodePolicy::SourceDist:
    case CodePolicy::Estimated: {
      if (inputs.distribution == nullptr) {
        throw Error(ErrorKind::Policy, std::string(to_string(policy)) + " codes need a class distribution");
      }
      if (inputs.distribution->size() != num_classes) throw Error(ErrorKind::Shape, "code distribution size mismatch");
      const auto& p = inputs.distribution->vector();
      std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
      for (std::size_t i = 0; i < m; ++i) batch.codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pick(rng))) = 1.0;
      break;
    }
    case CodePolicy::CoupledLabel: {
      if (inputs.labels.size() != m) throw Error(ErrorKind::Policy, "coupled codes need one label per row");
      for (std::size_t i = 0; i < m; ++i) {
        const int y = inputs.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw Error(ErrorKind::Bounds, "code label out of range");
        batch.codes(static_cast<Eigen::Index>(i), y) = 1.0;
      }
      break;
    }
  }
  return batch;
}

LatentCodeBatch constant_code(std::size_t m, std::size_t num_classes, int k) {
  LatentCodeBatch batch;
  batch.policy = CodePolicy::CoupledLabel;
  batch.codes = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(num_classes));
  batch.codes.col(k).setOnes();
  return batch;
}

Matrix concat_codes(const Matrix& encoded, const Matrix& codes) {
  if (encoded.rows() != codes.rows()) throw Error(ErrorKind::Shape, "codes and encodings differ in row count");
  Matrix z(encoded.rows(), encoded.cols() + codes.cols());
  z << encoded, codes;
  return z;
}

AdversarialPass adversarial_forward(const LadaModel& model, const Matrix& encoded, const LatentCodeBatch& codes,
                                    const PassMode& mode) {
  if (encoded.cols() != static_cast<Eigen::Index>(model.dims.encoding_dim)) {
    throw Error(ErrorKind::Shape, "adversarial_forward: encoding width mismatch");
  }
  if (codes.codes.cols() != static_cast<Eigen::Index>(model.dims.num_classes)) {
    throw Error(ErrorKind::Shape, "adversarial_forward: code width mismatch");
  }
  AdversarialPass pass;
  pass.generator = model.generator.forward(concat_codes(encoded, codes.codes), mode.dropout_p, mode.rng, mode.train);
  pass.discriminator = model.discriminator.forward(pass.generator.output, 0.0, nullptr, mode.train);
  pass.auxiliary = model.auxiliary.forward(pass.generator.output, 0.0, nullptr, mode.train);
  return pass;
}

Matrix encode_source(const LadaModel& model, const Matrix& x) { return model.source_encoder.predict(x); }

Matrix encode_target(const LadaModel& model, const Matrix& x) { return model.target_encoder.predict(x); }

Matrix classify_target(const LadaModel& model, const Matrix& x_target) {
  return model.classifier.predict(encode_target(model, x_target));
}

Matrix classify_source(const LadaModel& model, const Matrix& x_source) {
  return model.classifier.predict(encode_source(model, x_source));
}

Matrix q_predict_target(const LadaModel& model, const Matrix& x_target, const LatentCodeBatch& codes) {
  return adversarial_forward(model, encode_target(model, x_target), codes).q_probs();
}

Matrix q_predict_marginal(const LadaModel& model, const Matrix& x_target, const ClassDistribution& prior) {
  const auto num_classes = static_cast<Eigen::Index>(model.dims.num_classes);
  if (prior.size() != model.dims.num_classes) throw Error(ErrorKind::Shape, "code prior size mismatch");
  const Matrix encoded = encode_target(model, x_target);
  Matrix out = Matrix::Zero(x_target.rows(), num_classes);
  for (Eigen::Index k = 0; k < num_classes; ++k) {
    const double weight = prior[static_cast<std::size_t>(k)];
    if (weight == 0.0) continue;
    const LatentCodeBatch codes = constant_code(static_cast<std::size_t>(x_target.rows()), model.dims.num_classes, static_cast<int>(k));
    out += weight * adversarial_forward(model, encoded, codes).q_probs();
  }
  return out;
}

Matrix fuse_predictions(const Matrix& p_classifier, const Matrix& p_auxiliary) {
  require_shape(p_auxiliary, p_classifier.rows(), p_classifier.cols(), "fuse_predictions");
  return 0.5 * (p_classifier + p_auxiliary);
}

}  // namespace lada
