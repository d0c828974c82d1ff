#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <numeric>

#include "lada/error.hpp"
#include "lada/lada_net.hpp"
#include "support.hpp"

using namespace lada;
using lada::testing::random_matrix;
using lada::testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected lada::Error";
  return ErrorKind::State;
}

ModelDims tiny_dims() {
  ModelDims d;
  d.feature_dim = 6;
  d.encoding_dim = 5;
  d.num_classes = 4;
  d.generator_hidden = {7, 3};
  return d;
}

double max_row_sum_error(const Matrix& p) { return (p.rowwise().sum().array() - 1.0).abs().maxCoeff(); }

}  // namespace

TEST(InitModel, DefaultShapes) {
  Rng rng(1);
  ModelDims d;
  const LadaModel m = init_model(d, rng);
  EXPECT_EQ(m.source_encoder.output_dim(), 128u);
  EXPECT_EQ(m.generator.input_dim(), 128u + 11u);
  EXPECT_EQ(m.generator.output_dim(), 64u);
  EXPECT_EQ(m.discriminator.output_dim(), 2u);
  EXPECT_EQ(m.auxiliary.output_dim(), 11u);
  EXPECT_EQ(m.classifier.output_dim(), 11u);
  std::vector<std::size_t> widths;
  for (const Layer& l : m.generator.layers()) widths.push_back(static_cast<std::size_t>(l.out_dim()));
  EXPECT_EQ(widths, (std::vector<std::size_t>{256, 128, 64}));
}

TEST(InitModel, TargetEncoderIsAnIndependentCopy) {
  Rng rng(2);
  LadaModel m = init_model(tiny_dims(), rng);
  const Matrix x = random_matrix(9, 6, rng);
  EXPECT_EQ(encode_source(m, x), encode_target(m, x));
  const auto hs = parameter_hash(m.source_encoder);
  m.target_encoder.layers()[0].weight(0, 0) += 1.0;
  EXPECT_EQ(parameter_hash(m.source_encoder), hs);
  EXPECT_NE(encode_source(m, x), encode_target(m, x));
}

TEST(InitModel, RejectsBadDims) {
  Rng rng(3);
  ModelDims d = tiny_dims();
  d.generator_hidden.clear();
  EXPECT_EQ(kind_of([&] { init_model(d, rng); }), ErrorKind::Spec);
  d = tiny_dims();
  d.num_classes = 1;
  EXPECT_EQ(kind_of([&] { init_model(d, rng); }), ErrorKind::Spec);
}

TEST(SampleCodes, PoliciesProduceOneHotRows) {
  Rng rng(4);
  const std::vector<int> labels{2, 0};
  const LatentCodeBatch c = sample_codes(CodePolicy::CoupledLabel, 2, 4, rng, {labels});
  Matrix expected = Matrix::Zero(2, 4);
  expected(0, 2) = 1;
  expected(1, 0) = 1;
  EXPECT_EQ(c.codes, expected);
  EXPECT_EQ(sample_codes(CodePolicy::Zero, 3, 4, rng).codes, Matrix::Zero(3, 4));
  const ClassDistribution p({0.0, 1.0, 0.0, 0.0});
  const LatentCodeBatch e = sample_codes(CodePolicy::Estimated, 5, 4, rng, {{}, &p});
  EXPECT_EQ(e.codes.col(1), Vector::Ones(5));
}

TEST(SampleCodes, UniformFrequencies) {
  Rng rng(5);
  const LatentCodeBatch c = sample_codes(CodePolicy::Uniform, 10000, 5, rng);
  EXPECT_EQ(c.codes.sum(), 10000.0);
  const Eigen::RowVectorXd freq = c.codes.colwise().sum() / 10000.0;
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_NEAR(freq(k), 0.2, 0.02);
}

TEST(SampleCodes, SourceDistFrequencies) {
  Rng rng(6);
  const ClassDistribution p({0.5, 0.3, 0.2, 0.0});
  const LatentCodeBatch c = sample_codes(CodePolicy::SourceDist, 20000, 4, rng, {{}, &p});
  const Eigen::RowVectorXd freq = c.codes.colwise().sum() / 20000.0;
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(freq(k), p[static_cast<std::size_t>(k)], 0.015);
}

TEST(SampleCodes, MissingInputsArePolicyErrors) {
  Rng rng(7);
  EXPECT_EQ(kind_of([&] { sample_codes(CodePolicy::CoupledLabel, 2, 4, rng); }), ErrorKind::Policy);
  EXPECT_EQ(kind_of([&] { sample_codes(CodePolicy::Estimated, 2, 4, rng); }), ErrorKind::Policy);
  EXPECT_EQ(kind_of([&] { sample_codes(CodePolicy::SourceDist, 2, 4, rng); }), ErrorKind::Policy);
  const std::vector<int> bad{4, 0};
  EXPECT_EQ(kind_of([&] { sample_codes(CodePolicy::CoupledLabel, 2, 4, rng, {bad}); }), ErrorKind::Bounds);
}

TEST(AdversarialForward, HeadsAreRowStochastic) {
  Rng rng(8);
  const LadaModel m = init_model(tiny_dims(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix enc = random_matrix(1 + trial, 5, rng, 3.0);
    const LatentCodeBatch c = sample_codes(CodePolicy::Uniform, static_cast<std::size_t>(enc.rows()), 4, rng);
    const AdversarialPass p = adversarial_forward(m, enc, c);
    EXPECT_LT(max_row_sum_error(p.d_probs()), 1e-9);
    EXPECT_LT(max_row_sum_error(p.q_probs()), 1e-9);
    EXPECT_EQ(p.g().cols(), 3);
    EXPECT_EQ(p.d_probs().cols(), 2);
  }
  EXPECT_LT(max_row_sum_error(classify_target(m, random_matrix(5, 6, rng))), 1e-9);
}

TEST(AdversarialForward, FreshDiscriminatorIsNearHalf) {
  Rng rng(9);
  const LadaModel m = init_model(ModelDims{}, rng);
  const Matrix x = random_matrix(64, 64, rng);
  const LatentCodeBatch c = sample_codes(CodePolicy::Uniform, 64, 11, rng);
  const double mean = adversarial_forward(m, encode_source(m, x), c).d_probs().col(kSourceColumn).mean();
  EXPECT_NEAR(mean, 0.5, 0.2);
}

TEST(AdversarialForward, PermutingRowsPermutesOutputs) {
  Rng rng(10);
  const LadaModel m = init_model(tiny_dims(), rng);
  const Matrix enc = random_matrix(6, 5, rng);
  const LatentCodeBatch c = sample_codes(CodePolicy::Uniform, 6, 4, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 1, 5, 0, 2, 4;
  LatentCodeBatch cp = c;
  cp.codes = perm * c.codes;
  const AdversarialPass a = adversarial_forward(m, enc, c);
  const AdversarialPass b = adversarial_forward(m, perm * enc, cp);
  EXPECT_LT((perm * a.q_probs() - b.q_probs()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((perm * a.d_probs() - b.d_probs()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdversarialForward, ZeroCodesEqualReducedNetwork) {
  Rng rng(11);
  const LadaModel m = init_model(tiny_dims(), rng);
  std::vector<Layer> reduced = m.generator.layers();
  reduced[0].weight = reduced[0].weight.leftCols(5).eval();
  const Mlp code_free(reduced);
  const Matrix enc = random_matrix(8, 5, rng);
  const AdversarialPass p = adversarial_forward(m, enc, sample_codes(CodePolicy::Zero, 8, 4, rng));
  const Matrix g = code_free.predict(enc);
  EXPECT_LT((p.g() - g).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((p.d_probs() - m.discriminator.predict(g)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdversarialForward, ShapeErrors) {
  Rng rng(12);
  const LadaModel m = init_model(tiny_dims(), rng);
  EXPECT_EQ(kind_of([&] { adversarial_forward(m, Matrix::Zero(2, 4), sample_codes(CodePolicy::Zero, 2, 4, rng)); }),
            ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { adversarial_forward(m, Matrix::Zero(2, 5), sample_codes(CodePolicy::Zero, 2, 3, rng)); }),
            ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { adversarial_forward(m, Matrix::Zero(2, 5), sample_codes(CodePolicy::Zero, 3, 4, rng)); }),
            ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { classify_target(m, Matrix::Zero(2, 5)); }), ErrorKind::Shape);
}

TEST(Predictions, MarginalIsPriorWeightedSum) {
  Rng rng(13);
  const LadaModel m = init_model(tiny_dims(), rng);
  const Matrix x = random_matrix(7, 6, rng);
  const ClassDistribution prior({0.1, 0.0, 0.6, 0.3});
  Matrix expected = Matrix::Zero(7, 4);
  for (int k = 0; k < 4; ++k) expected += prior[static_cast<std::size_t>(k)] * q_predict_target(m, x, constant_code(7, 4, k));
  const Matrix got = q_predict_marginal(m, x, prior);
  EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(max_row_sum_error(got), 1e-12);
  EXPECT_EQ(kind_of([&] { q_predict_marginal(m, x, ClassDistribution::uniform(3)); }), ErrorKind::Shape);
}

TEST(Predictions, FuseAveragesRows) {
  Matrix a(1, 2), b(1, 2);
  a << 0.8, 0.2;
  b << 0.6, 0.4;
  const Matrix f = fuse_predictions(a, b);
  EXPECT_NEAR(f(0, 0), 0.7, 1e-15);
  EXPECT_NEAR(f(0, 1), 0.3, 1e-15);
  EXPECT_EQ(fuse_predictions(a, a), a);
  EXPECT_EQ(kind_of([&] { fuse_predictions(a, Matrix::Zero(2, 2)); }), ErrorKind::Shape);
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir("ckpt");
  Rng rng(14);
  LadaModel m = init_model(tiny_dims(), rng);
  m.target_encoder.layers()[0].bias(1) = 0.125;
  save_checkpoint(m, dir.path() / "m.bin");
  const LadaModel back = load_checkpoint(dir.path() / "m.bin");
  EXPECT_EQ(back.dims.feature_dim, 6u);
  EXPECT_EQ(back.dims.generator_hidden, (std::vector<std::size_t>{7, 3}));
  const std::pair<const Mlp*, const Mlp*> nets[] = {{&m.source_encoder, &back.source_encoder},
                                                    {&m.target_encoder, &back.target_encoder},
                                                    {&m.classifier, &back.classifier},
                                                    {&m.generator, &back.generator},
                                                    {&m.discriminator, &back.discriminator},
                                                    {&m.auxiliary, &back.auxiliary}};
  for (const auto& [a, b] : nets) {
    EXPECT_EQ(parameter_hash(*a), parameter_hash(*b));
    ASSERT_EQ(a->num_layers(), b->num_layers());
    for (std::size_t i = 0; i < a->num_layers(); ++i) {
      EXPECT_EQ(a->layers()[i].activation, b->layers()[i].activation);
      EXPECT_EQ(a->layers()[i].dropout, b->layers()[i].dropout);
    }
  }
}

TEST(Checkpoint, RejectsCorruptFiles) {
  TempDir dir("ckpt");
  Rng rng(15);
  save_checkpoint(init_model(tiny_dims(), rng), dir.path() / "m.bin");
  std::string bytes;
  {
    std::ifstream in(dir.path() / "m.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir.path() / name, std::ios::binary) << content;
    return dir.path() / name;
  };
  EXPECT_EQ(kind_of([&] { load_checkpoint(write("t.bin", bytes.substr(0, bytes.size() - 9))); }), ErrorKind::Parse);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { load_checkpoint(write("m2.bin", magic)); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { load_checkpoint(write("x.bin", bytes + "z")); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir.path() / "none.bin"); }), ErrorKind::Io);
}
