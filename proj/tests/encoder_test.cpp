#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tcrl/batch.hpp"
#include "tcrl/checkpoint.hpp"
#include "tcrl/corpus.hpp"
#include "tcrl/encoder.hpp"
#include "tcrl/errors.hpp"
#include "tcrl/linalg.hpp"
#include "tcrl/rng.hpp"
#include "tcrl/train.hpp"

namespace tcrl {
namespace {

EncoderConfig small_config(NormalizationMode mode) {
  EncoderConfig config;
  config.num_states = 6;
  config.num_actions = 2;
  config.num_goals = 2;
  config.hidden_dim = 8;
  config.embed_dim = 4;
  config.mode = mode;
  return config;
}

Batch small_batch() {
  std::vector<BatchSample> samples = {
      {0, 0, 3, 1, 1, 4}, {0, 0, 1, 0, 2, 5}, {1, 1, 5, 1, 1, 3},
      {1, 1, 2, 0, 3, 3}, {0, 0, 4, 1, 4, 4},
  };
  return make_batch(std::move(samples));
}

CorpusConfig chain_corpus_config() {
  CorpusConfig cc;
  cc.family = MdpFamily::kChain;
  cc.num_tasks = 2;
  cc.arm_length = 4;
  cc.trajectories_per_task = 3;
  cc.gamma = 0.9;
  cc.seed = 7;
  cc.mdp_seed = 7;
  return cc;
}

TEST(Encoder, InitIsDeterministicPerSeed) {
  EncoderConfig config = small_config(NormalizationMode::kL2Temp);
  EncoderParams a = init_encoder(config, 11);
  EncoderParams b = init_encoder(config, 11);
  EncoderParams c = init_encoder(config, 12);
  ASSERT_EQ(a.theta.size(), b.theta.size());
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_NE(a.theta, c.theta);
  EXPECT_EQ(a.theta.size(), a.num_params());
}

TEST(Encoder, L2ModeProducesUnitNorms) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 3);
  for (int s = 0; s < 6; ++s) {
    for (int a = 0; a < 2; ++a) {
      std::vector<double> phi = encode_sa(params, s, a);
      EXPECT_NEAR(l2_norm(phi), 1.0, 1e-12);
    }
  }
  for (int g = 0; g < 2; ++g)
    EXPECT_NEAR(l2_norm(encode_goal(params, g)), 1.0, 1e-12);
}

TEST(Encoder, DistinctInputsGetDistinctEmbeddings) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 5);
  std::vector<std::vector<double>> seen;
  for (int s = 0; s < 6; ++s)
    for (int a = 0; a < 2; ++a) seen.push_back(encode_sa(params, s, a));
  for (size_t i = 0; i < seen.size(); ++i) {
    for (size_t j = i + 1; j < seen.size(); ++j) {
      double dist = 0.0;
      for (size_t k = 0; k < seen[i].size(); ++k) {
        double d = seen[i][k] - seen[j][k];
        dist += d * d;
      }
      EXPECT_GT(dist, 1e-12);
    }
  }
}

TEST(Encoder, PairScoreMatchesForwardLogits) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 9);
  Batch batch = small_batch();
  EncoderForward fwd = encoder_forward(params, batch);
  for (int i = 0; i < batch.size(); ++i) {
    const BatchSample& s = batch.samples[i];
    for (int c = 0; c < batch.num_unique(); ++c) {
      double direct = pair_score(params, s.state, s.action, batch.unique_goals[c]);
      EXPECT_NEAR(direct, fwd.sim.at(i, c), 1e-12);
    }
  }
}

TEST(Encoder, RawModePinsTemperature) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kRaw), 4);
  EXPECT_DOUBLE_EQ(params.temperature(), 1.0);
  EncoderForward fwd = encoder_forward(params, small_batch());
  EXPECT_DOUBLE_EQ(fwd.temperature, 1.0);
}

TEST(Encoder, OutOfRangeInputsThrow) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 4);
  EXPECT_THROW(encode_sa(params, 6, 0), ValidationError);
  EXPECT_THROW(encode_sa(params, 0, 2), ValidationError);
  EXPECT_THROW(encode_goal(params, 2), ValidationError);
}

TEST(Encoder, ZeroEmbeddingTriggersNumericError) {
  EncoderConfig config = small_config(NormalizationMode::kL2Temp);
  EncoderParams params = init_encoder(config, 4);
  for (double& v : params.theta) v = 0.0;
  EXPECT_THROW(encode_sa(params, 0, 0), NumericError);
}

TEST(Encoder, FiniteDifferencesAgreeInBothModes) {
  Batch batch = small_batch();
  for (NormalizationMode mode :
       {NormalizationMode::kL2Temp, NormalizationMode::kRaw}) {
    for (uint64_t seed : {21u, 22u}) {
      EncoderParams params = init_encoder(small_config(mode), seed);
      Rng rng(seed);
      double err = finite_diff_check(params, batch, 0.95, 0.7, 1e-5, 500, rng);
      EXPECT_LT(err, 1e-5) << "mode " << normalization_to_string(mode)
                           << " seed " << seed;
    }
  }
}

TEST(Encoder, FiniteDifferencesWithZeroLambda) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 2);
  Rng rng(2);
  double err = finite_diff_check(params, small_batch(), 0.95, 0.0, 1e-5, 500, rng);
  EXPECT_LT(err, 1e-12);
}

TEST(Encoder, FiniteDifferenceStepRangeIsEnforced) {
  EncoderParams params = init_encoder(small_config(NormalizationMode::kL2Temp), 2);
  Rng rng(2);
  Batch batch = small_batch();
  EXPECT_THROW(finite_diff_check(params, batch, 0.95, 1.0, 1e-2, 500, rng),
               ValidationError);
  EXPECT_THROW(finite_diff_check(params, batch, 0.95, 1.0, 1e-8, 500, rng),
               ValidationError);
}

TEST(Train, SameSeedReproducesBitExactly) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.steps = 40;
  tc.hidden_dim = 16;
  tc.embed_dim = 8;
  tc.seed = 5;
  TrainResult a = train_encoders(corpus, tc);
  TrainResult b = train_encoders(corpus, tc);
  EXPECT_EQ(a.params.theta, b.params.theta);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].loss_sa_to_l, b.history[i].loss_sa_to_l);
    EXPECT_EQ(a.history[i].grad_norm, b.history[i].grad_norm);
  }
}

TEST(Train, FullBatchSgdDescendsSmoothly) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.mode = NormalizationMode::kRaw;
  tc.steps = 30;
  tc.learning_rate = 1e-4;
  tc.optimizer = Optimizer::kSgd;
  tc.hidden_dim = 16;
  tc.embed_dim = 8;
  TrainResult result = train_encoders(corpus, tc);
  ASSERT_GT(result.history.size(), 2u);
  auto total = [](const StepRecord& r) { return r.loss_sa_to_l + r.loss_l_to_sa; };
  for (size_t i = 1; i < result.history.size(); ++i)
    EXPECT_LE(total(result.history[i]), total(result.history[i - 1]) + 1e-9);
  EXPECT_LT(total(result.history.back()), total(result.history.front()));
}

TEST(Train, ZeroLambdaLeavesParametersAtInit) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.lambda_crl = 0.0;
  tc.steps = 0;
  TrainResult init = train_encoders(corpus, tc);
  tc.steps = 25;
  TrainResult after = train_encoders(corpus, tc);
  EXPECT_EQ(init.params.theta, after.params.theta);
}

TEST(Train, MiniBatchPathRunsAndRecords) {
  CorpusConfig cc = chain_corpus_config();
  cc.trajectories_per_task = 4;
  Corpus corpus = generate_corpus(cc);
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.steps = 30;
  tc.batch_size = 6;
  tc.record_every = 5;
  TrainResult result = train_encoders(corpus, tc);
  ASSERT_FALSE(result.history.empty());
  EXPECT_EQ(result.history.front().step, 1);
  EXPECT_EQ(result.history.back().step, 30);
  for (const StepRecord& r : result.history) {
    EXPECT_TRUE(std::isfinite(r.loss_sa_to_l));
    EXPECT_TRUE(std::isfinite(r.loss_l_to_sa));
    EXPECT_GT(r.grad_norm, 0.0);
  }
}

TEST(Train, InvalidConfigsAreRejected) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.batch_size = 1;
  EXPECT_THROW(train_encoders(corpus, tc), ValidationError);
  tc.batch_size = 0;
  tc.steps = -3;
  EXPECT_THROW(train_encoders(corpus, tc), ValidationError);
  tc.steps = 10;
  tc.learning_rate = 0.0;
  EXPECT_THROW(train_encoders(corpus, tc), ValidationError);
}

TEST(Train, ContrastiveLossOnSingleTaskCorpusIsRejected) {
  CorpusConfig cc = chain_corpus_config();
  cc.num_tasks = 1;
  Corpus corpus = generate_corpus(cc);
  TrainConfig tc;
  tc.gamma = 0.9;
  EXPECT_THROW(train_encoders(corpus, tc), ValidationError);
}

TEST(Train, ExplodedParametersRaiseNumericError) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.mode = NormalizationMode::kRaw;
  tc.steps = 5;
  tc.optimizer = Optimizer::kSgd;
  tc.learning_rate = 1e300;
  EXPECT_THROW(train_encoders(corpus, tc), NumericError);
}

TEST(Train, RawModeApproachesLogOccupancyOnChain) {
  // Weight decay keeps the column softmax unsaturated, which ties the
  // per-goal logit levels together; without it they drift apart freely.
  CorpusConfig cc = chain_corpus_config();
  cc.arm_length = 10;
  cc.trajectories_per_task = 2;
  cc.seed = 3;
  cc.mdp_seed = 3;
  Corpus corpus = generate_corpus(cc);
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.mode = NormalizationMode::kRaw;
  tc.steps = 3000;
  tc.learning_rate = 1e-2;
  tc.weight_decay = 1e-2;
  tc.hidden_dim = 32;
  tc.embed_dim = 8;
  tc.seed = 1;
  tc.record_every = 500;
  TrainResult result = train_encoders(corpus, tc);

  Batch batch = full_batch(corpus);
  EncoderForward fwd = encoder_forward(result.params, batch);
  std::vector<double> residuals;
  for (int i = 0; i < batch.size(); ++i) {
    const BatchSample& s = batch.samples[i];
    double target = std::log(1.0 - tc.gamma) + (s.T - s.t) * std::log(tc.gamma);
    residuals.push_back(fwd.sim.at(i, batch.column_of_sample[i]) - target);
  }
  double mean = 0.0;
  for (double r : residuals) mean += r;
  mean /= residuals.size();
  double var = 0.0;
  for (double r : residuals) var += (r - mean) * (r - mean);
  var /= residuals.size();
  EXPECT_LT(std::sqrt(var), 0.05);
}

TEST(Checkpoint, EncoderRoundTripIsBitExact) {
  Corpus corpus = generate_corpus(chain_corpus_config());
  TrainConfig tc;
  tc.gamma = 0.9;
  tc.steps = 20;
  tc.hidden_dim = 16;
  tc.embed_dim = 8;
  TrainResult result = train_encoders(corpus, tc);

  std::string path = ::testing::TempDir() + "encoder_ckpt.txt";
  Checkpoint out;
  out.encoder = result.params;
  save_checkpoint(out, path);
  Checkpoint in = load_checkpoint(path);
  ASSERT_TRUE(in.encoder.has_value());
  EXPECT_FALSE(in.flow.has_value());
  EXPECT_EQ(in.encoder->theta, result.params.theta);
  EXPECT_EQ(in.encoder->config.hidden_dim, result.params.config.hidden_dim);
  EXPECT_EQ(normalization_to_string(in.encoder->config.mode),
            normalization_to_string(result.params.config.mode));
}

TEST(Checkpoint, MissingFileThrows) {
  EXPECT_THROW(load_checkpoint("/nonexistent/path/ckpt.txt"), ValidationError);
}

}  // namespace
}  // namespace tcrl
