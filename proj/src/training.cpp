#include "lada/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lada/error.hpp"
#include "lada/ndnum/losses.hpp"

namespace lada {

std::string VariantSpec::name() const {
  std::string out = "LADA-";
  if (variant == Variant::Zero && regime == Regime::TwoStage) return out + "0";
  out += regime == Regime::TwoStage ? "2" : "3";
  switch (variant) {
    case Variant::Zero: return out + "0";
    case Variant::Uniform: return out + "U";
    case Variant::SourceDist: return out + "S";
    case Variant::Target: return out + "T";
  }
  return out;
}

VariantSpec VariantSpec::parse(std::string_view name) {
  const std::string_view prefix = "LADA-";
  if (name.substr(0, prefix.size()) != prefix) {
    throw Error(ErrorKind::Config, "variant '" + std::string(name) + "' must look like LADA-0, LADA-2U, LADA-3T");
  }
  std::string_view rest = name.substr(prefix.size());
  VariantSpec spec;
  spec.regime = Regime::TwoStage;
  if (rest.size() == 2 && (rest[0] == '2' || rest[0] == '3')) {
    spec.regime = rest[0] == '3' ? Regime::ThreePlayer : Regime::TwoStage;
    rest.remove_prefix(1);
  }
  if (rest == "0") {
    spec.variant = Variant::Zero;
  } else if (rest == "U") {
    spec.variant = Variant::Uniform;
  } else if (rest == "S") {
    spec.variant = Variant::SourceDist;
  } else if (rest == "T") {
    spec.variant = Variant::Target;
  } else {
    throw Error(ErrorKind::Config, "unknown variant '" + std::string(name) + "'");
  }
  return spec;
}

void TrainConfig::validate() const {
  if (source_batch == 0 || target_batch == 0) throw Error(ErrorKind::Config, "train: batch sizes must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "train.lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::Config, "train.dropout must lie in [0,1)");
  if (warmup_iters && *warmup_iters > stage2_iters) {
    throw Error(ErrorKind::Config, "train.warmup_iters exceeds train.stage2_iters");
  }
  if (reestimate_every == 0) throw Error(ErrorKind::Config, "train.reestimate_every must be >= 1");
  if (eval_every == 0) throw Error(ErrorKind::Config, "train.eval_every must be >= 1");
  if (encoding_dim == 0 || generator_hidden.empty()) throw Error(ErrorKind::Config, "model dims must be positive");
}

std::size_t TrainConfig::resolved_warmup() const {
  return warmup_iters.value_or(static_cast<std::size_t>(0.3 * static_cast<double>(stage2_iters)));
}

ModelDims TrainConfig::model_dims(std::size_t feature_dim, std::size_t num_classes) const {
  ModelDims dims;
  dims.feature_dim = feature_dim;
  dims.encoding_dim = encoding_dim;
  dims.num_classes = num_classes;
  dims.generator_hidden = generator_hidden;
  return dims;
}

OptimizerSettings TrainConfig::optimizer_settings() const {
  OptimizerSettings s;
  s.kind = optimizer;
  s.learning_rate = learning_rate;
  return s;
}

std::vector<const TraceRow*> TrainTrace::stage(int s) const {
  std::vector<const TraceRow*> out;
  for (const TraceRow& row : rows) {
    if (row.stage == s) out.push_back(&row);
  }
  return out;
}

std::string TrainTrace::csv_header() {
  return "stage,iteration,loss_cls,loss_adv_d,loss_adv_e,loss_q,mean_d_source,mean_d_target,"
         "source_acc,target_acc,entropy_p,kl_est_true,kl_est_source";
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write trace " + path.string());
  std::ostringstream buf;
  buf.precision(17);
  buf << csv_header() << '\n';
  auto cell = [&buf](double v) {
    buf << ',';
    if (!std::isnan(v)) buf << v;
  };
  for (const TraceRow& r : rows) {
    buf << r.stage << ',' << r.iteration;
    cell(r.loss_cls);
    cell(r.loss_adv_d);
    cell(r.loss_adv_e);
    cell(r.loss_q);
    cell(r.mean_d_source);
    cell(r.mean_d_target);
    cell(r.source_acc);
    cell(r.target_acc);
    cell(r.entropy_p);
    cell(r.kl_est_true);
    cell(r.kl_est_source);
    buf << '\n';
  }
  out << buf.str();
  if (!out) throw Error(ErrorKind::Io, "trace write failed: " + path.string());
}

namespace {

void accumulate(MlpGrads& into, const MlpGrads& from) {
  for (std::size_t i = 0; i < into.layers.size(); ++i) {
    into.layers[i].weight += from.layers[i].weight;
    into.layers[i].bias += from.layers[i].bias;
  }
}

MlpGrads sum_grads(MlpGrads a, const MlpGrads& b) {
  accumulate(a, b);
  return a;
}

const Matrix& logits(const ActivationStack& head) { return head.pre.back(); }

double mean_source_prob(const Matrix& d_probs) { return d_probs.col(kSourceColumn).mean(); }

}  // namespace

DiscriminatorLoss discriminator_loss(const LadaModel& model, const Matrix& xs, const LatentCodeBatch& cs,
                                     const Matrix& xt, const LatentCodeBatch& ct, const PassMode& mode) {
  const Matrix enc_s = model.source_encoder.forward(xs, mode.dropout_p, mode.rng, mode.train).output;
  const Matrix enc_t = model.target_encoder.forward(xt, mode.dropout_p, mode.rng, mode.train).output;
  const AdversarialPass ps = adversarial_forward(model, enc_s, cs, mode);
  const AdversarialPass pt = adversarial_forward(model, enc_t, ct, mode);

  const LossGrad ls = softmax_cross_entropy(logits(ps.discriminator), kSourceColumn);
  const LossGrad lt = softmax_cross_entropy(logits(pt.discriminator), kTargetColumn);
  const MlpGrads ds = model.discriminator.backward(ps.discriminator, ls.grad);
  const MlpGrads dt = model.discriminator.backward(pt.discriminator, lt.grad);

  DiscriminatorLoss out;
  out.loss = ls.loss + lt.loss;
  out.mean_d_source = mean_source_prob(ps.d_probs());
  out.mean_d_target = mean_source_prob(pt.d_probs());
  out.generator = sum_grads(model.generator.backward(ps.generator, ds.input),
                            model.generator.backward(pt.generator, dt.input));
  out.discriminator = sum_grads(ds, dt);
  return out;
}

EncoderLoss encoder_loss(const LadaModel& model, const Matrix& xt, const LatentCodeBatch& ct, const PassMode& mode) {
  const ActivationStack st = model.target_encoder.forward(xt, mode.dropout_p, mode.rng, mode.train);
  const AdversarialPass pt = adversarial_forward(model, st.output, ct, mode);
  const LossGrad l = softmax_cross_entropy(logits(pt.discriminator), kSourceColumn);
  const MlpGrads dd = model.discriminator.backward(pt.discriminator, l.grad);
  const MlpGrads gg = model.generator.backward(pt.generator, dd.input);
  const auto e = static_cast<Eigen::Index>(model.dims.encoding_dim);

  EncoderLoss out;
  out.loss = l.loss;
  out.target_encoder = model.target_encoder.backward(st, gg.input.leftCols(e));
  return out;
}

AuxiliaryLoss auxiliary_loss(const LadaModel& model, const Matrix& xs, const LatentCodeBatch& cs, const Matrix& xt,
                             const LatentCodeBatch& ct, const PassMode& mode, bool through_trunk) {
  const ActivationStack ss = model.source_encoder.forward(xs, mode.dropout_p, mode.rng, mode.train);
  const ActivationStack st = model.target_encoder.forward(xt, mode.dropout_p, mode.rng, mode.train);
  const AdversarialPass ps = adversarial_forward(model, ss.output, cs, mode);
  const AdversarialPass pt = adversarial_forward(model, st.output, ct, mode);

  const LossGrad ls = softmax_cross_entropy_soft(logits(ps.auxiliary), cs.codes);
  const LossGrad lt = softmax_cross_entropy_soft(logits(pt.auxiliary), ct.codes);

  // H(P) over the fused target prediction; the classifier term is a constant.
  const Matrix p_classifier = model.classifier.forward(st.output, 0.0, nullptr, mode.train).output;
  const RelaxedAssignment relaxed = RelaxedAssignment::from_probs(fuse_predictions(p_classifier, pt.q_probs()));
  const RelaxedEntropy h = relaxed_entropy(relaxed);
  const Matrix entropy_logit_grad = softmax_backward(pt.q_probs(), 0.5 * h.grad_probs);

  AuxiliaryLoss out;
  out.entropy_p = h.value;
  out.loss = ls.loss + lt.loss + h.value;
  const MlpGrads qs = model.auxiliary.backward(ps.auxiliary, ls.grad);
  const MlpGrads qt = model.auxiliary.backward(pt.auxiliary, lt.grad + entropy_logit_grad);
  out.auxiliary = sum_grads(qs, qt);
  if (through_trunk) {
    const MlpGrads gs = model.generator.backward(ps.generator, qs.input);
    const MlpGrads gt = model.generator.backward(pt.generator, qt.input);
    out.generator = sum_grads(gs, gt);
    const auto e = static_cast<Eigen::Index>(model.dims.encoding_dim);
    out.source_encoder = model.source_encoder.backward(ss, gs.input.leftCols(e));
  }
  return out;
}

ClassifierLoss classification_loss(const LadaModel& model, const Matrix& xs, std::span<const int> ys,
                                   const PassMode& mode) {
  const ActivationStack se = model.source_encoder.forward(xs, mode.dropout_p, mode.rng, mode.train);
  const ActivationStack sc = model.classifier.forward(se.output, 0.0, nullptr, mode.train);
  const LossGrad l = softmax_cross_entropy(logits(sc), ys);
  ClassifierLoss out;
  out.loss = l.loss;
  out.classifier = model.classifier.backward(sc, l.grad);
  out.source_encoder = model.source_encoder.backward(se, out.classifier.input);
  return out;
}

AdversarialTrainer::AdversarialTrainer(LadaModel& model, const TrainConfig& cfg, Rng& rng)
    : model_(model), cfg_(cfg), rng_(rng) {
  const OptimizerSettings s = cfg.optimizer_settings();
  d_generator_ = d_head_ = e_target_ = Optimizer(s);
  q_head_ = q_source_ = Optimizer(s);
  cls_source_ = cls_head_ = Optimizer(s);
}

DiscriminatorLoss AdversarialTrainer::step_discriminator(const Stage2Batch& b) {
  DiscriminatorLoss l = discriminator_loss(model_, b.source_x, b.source_codes, b.target_x, b.target_codes, train_mode());
  d_generator_.step(model_.generator, l.generator);
  d_head_.step(model_.discriminator, l.discriminator);
  return l;
}

double AdversarialTrainer::step_encoder(const Stage2Batch& b) {
  const EncoderLoss l = encoder_loss(model_, b.target_x, b.target_codes, train_mode());
  e_target_.step(model_.target_encoder, l.target_encoder);
  return l.loss;
}

AuxiliaryLoss AdversarialTrainer::step_auxiliary(const Stage2Batch& b) {
  const bool three = cfg_.variant.regime == Regime::ThreePlayer;
  AuxiliaryLoss l =
      auxiliary_loss(model_, b.source_x, b.source_codes, b.target_x, b.target_codes, train_mode(), three);
  q_head_.step(model_.auxiliary, l.auxiliary);
  if (three) {
    q_source_.step(model_.source_encoder, *l.source_encoder);
  }
  return l;
}

double AdversarialTrainer::step_classifier(const Stage2Batch& b) {
  const ClassifierLoss l = classification_loss(model_, b.source_x, b.source_y, train_mode());
  cls_source_.step(model_.source_encoder, l.source_encoder);
  cls_head_.step(model_.classifier, l.classifier);
  return l.loss;
}

double accuracy(const Matrix& probs, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) throw Error(ErrorKind::Shape, "accuracy: size mismatch");
  if (labels.empty()) return kAbsent;
  const std::vector<int> pred = argmax_rows(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

void check_finite(double v, const char* what, std::size_t iteration) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::Numeric, std::string(what) + " became non-finite at iteration " + std::to_string(iteration));
  }
}

std::vector<std::size_t> draw_indices(std::size_t m, std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(m);
  for (std::size_t& i : idx) i = pick(rng);
  return idx;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

void check_source(const LadaModel& model, const FeatureDataset& source) {
  source.require_labels();
  if (source.size() == 0) throw Error(ErrorKind::EmptyInput, "empty source dataset");
  if (source.dim() != model.dims.feature_dim) throw Error(ErrorKind::Shape, "source feature dim differs from model");
  if (source.num_classes != model.dims.num_classes) throw Error(ErrorKind::Shape, "source label space differs from model");
}

}  // namespace

void train_stage1(LadaModel& model, const FeatureDataset& source, const TrainConfig& cfg, TrainTrace& trace) {
  cfg.validate();
  check_source(model, source);
  if (cfg.stage1_iters == 0) return;
  const std::vector<int>& labels = *source.labels;

  Rng rng(mix_seed(cfg.seed, 1));
  Optimizer opt_encoder(cfg.optimizer_settings());
  Optimizer opt_classifier(cfg.optimizer_settings());
  const PassMode mode{cfg.dropout, &rng, true};
  for (std::size_t it = 0; it < cfg.stage1_iters; ++it) {
    const auto idx = draw_indices(cfg.source_batch, source.size(), rng);
    std::vector<int> ys(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) ys[i] = labels[idx[i]];
    const ClassifierLoss l = classification_loss(model, gather_rows(source.features, idx), ys, mode);
    check_finite(l.loss, "stage-1 loss", it);
    opt_encoder.step(model.source_encoder, l.source_encoder);
    opt_classifier.step(model.classifier, l.classifier);

    TraceRow row;
    row.stage = 1;
    row.iteration = it;
    row.loss_cls = l.loss;
    if (it % cfg.eval_every == 0 || it + 1 == cfg.stage1_iters) {
      row.source_acc = accuracy(classify_source(model, source.features), labels);
    }
    trace.rows.push_back(row);
  }
  model.copy_source_to_target();
}

std::optional<ClassDistribution> code_prior(Variant variant, const ClassDistribution& p_s,
                                            const std::optional<ClassDistribution>& estimate, std::size_t num_classes) {
  switch (variant) {
    case Variant::Zero: return std::nullopt;
    case Variant::Uniform: return ClassDistribution::uniform(num_classes);
    case Variant::SourceDist: return p_s;
    case Variant::Target: return estimate ? *estimate : ClassDistribution::uniform(num_classes);
  }
  return std::nullopt;
}

Matrix target_predictions(const LadaModel& model, const Matrix& x_target,
                          const std::optional<ClassDistribution>& prior) {
  Matrix p_classifier = classify_target(model, x_target);
  if (!prior) return p_classifier;
  return fuse_predictions(p_classifier, q_predict_marginal(model, x_target, *prior));
}

namespace {

ClassDistribution column_mean(const Matrix& probs) {
  if (probs.rows() == 0) throw Error(ErrorKind::EmptyInput, "no target instances to estimate from");
  return relaxed_marginal(RelaxedAssignment::from_probs(probs));
}

}  // namespace

ClassDistribution estimate_target_distribution(const LadaModel& model, const Matrix& x_target,
                                               const ClassDistribution& prior) {
  if (x_target.rows() == 0) throw Error(ErrorKind::EmptyInput, "estimate_target_distribution: empty target set");
  return column_mean(target_predictions(model, x_target, prior));
}

void train_stage2(LadaModel& model, const FeatureDataset& source, const Matrix& target_x, const TrainConfig& cfg,
                  TrainTrace& trace, const Stage2Options& options) {
  cfg.validate();
  check_source(model, source);
  if (target_x.rows() == 0) throw Error(ErrorKind::EmptyInput, "empty target set");
  if (static_cast<std::size_t>(target_x.cols()) != model.dims.feature_dim) {
    throw Error(ErrorKind::Shape, "target feature dim differs from model");
  }
  const std::vector<int>& labels = *source.labels;
  const std::size_t num_classes = model.dims.num_classes;
  const ClassDistribution p_s = empirical_distribution(labels, num_classes);
  const ClassDistribution p_s_smooth = p_s.smoothed(kDiagnosticSmoothing);
  const Variant variant = cfg.variant.variant;
  const bool three = cfg.variant.regime == Regime::ThreePlayer;
  const std::size_t warmup = cfg.resolved_warmup();

  Rng rng(mix_seed(cfg.seed, 2));
  AdversarialTrainer trainer(model, cfg, rng);
  std::optional<ClassDistribution> estimate;

  for (std::size_t it = 0; it < cfg.stage2_iters; ++it) {
    if (variant == Variant::Target && it >= warmup && (it - warmup) % cfg.reestimate_every == 0) {
      estimate = estimate_target_distribution(model, target_x, *code_prior(variant, p_s, estimate, num_classes));
    }

    Stage2Batch b;
    b.source_index = draw_indices(cfg.source_batch, source.size(), rng);
    b.target_index = draw_indices(cfg.target_batch, static_cast<std::size_t>(target_x.rows()), rng);
    b.source_x = gather_rows(source.features, b.source_index);
    b.target_x = gather_rows(target_x, b.target_index);
    b.source_y.resize(b.source_index.size());
    for (std::size_t i = 0; i < b.source_index.size(); ++i) b.source_y[i] = labels[b.source_index[i]];
    if (variant == Variant::Zero) {
      b.source_codes = sample_codes(CodePolicy::Zero, cfg.source_batch, num_classes, rng);
      b.target_codes = sample_codes(CodePolicy::Zero, cfg.target_batch, num_classes, rng);
    } else {
      b.source_codes = sample_codes(CodePolicy::CoupledLabel, cfg.source_batch, num_classes, rng, {b.source_y});
      switch (variant) {
        case Variant::Uniform:
          b.target_codes = sample_codes(CodePolicy::Uniform, cfg.target_batch, num_classes, rng);
          break;
        case Variant::SourceDist:
          b.target_codes = sample_codes(CodePolicy::SourceDist, cfg.target_batch, num_classes, rng, {{}, &p_s});
          break;
        default:
          b.target_codes = estimate ? sample_codes(CodePolicy::Estimated, cfg.target_batch, num_classes, rng, {{}, &*estimate})
                                    : sample_codes(CodePolicy::Uniform, cfg.target_batch, num_classes, rng);
          break;
      }
    }
    if (options.on_batch) options.on_batch(it, b);

    TraceRow row;
    row.stage = 2;
    row.iteration = it;
    const DiscriminatorLoss d = trainer.step_discriminator(b);
    row.loss_adv_d = d.loss;
    row.mean_d_source = d.mean_d_source;
    row.mean_d_target = d.mean_d_target;
    row.loss_adv_e = trainer.step_encoder(b);
    if (variant != Variant::Zero) {
      const AuxiliaryLoss q = trainer.step_auxiliary(b);
      row.loss_q = q.loss;
      row.entropy_p = q.entropy_p;
      check_finite(row.loss_q, "L_Q", it);
    }
    if (three) {
      row.loss_cls = trainer.step_classifier(b);
    } else {
      row.loss_cls = classification_loss(model, b.source_x, b.source_y, {}).loss;
    }
    check_finite(row.loss_adv_d, "L_adv_D", it);
    check_finite(row.loss_adv_e, "L_adv_E", it);
    check_finite(row.loss_cls, "L_cls", it);

    if (it % cfg.eval_every == 0 || it + 1 == cfg.stage2_iters) {
      row.source_acc = accuracy(classify_source(model, source.features), labels);
      const std::optional<ClassDistribution> prior = code_prior(variant, p_s, estimate, num_classes);
      const Matrix preds = target_predictions(model, target_x, prior);
      EvalSnapshot snap;
      snap.iteration = it;
      snap.model = &model;
      snap.target_predictions = &preds;
      if (prior) {
        snap.estimate = column_mean(preds);
        row.kl_est_source = kl_divergence(*snap.estimate, p_s_smooth);
      }
      if (options.eval_hook) {
        const EvalReport report = options.eval_hook(snap);
        row.target_acc = report.target_accuracy;
        row.kl_est_true = report.kl_est_true;
      }
    }
    trace.rows.push_back(row);
  }
}

}  // namespace lada
