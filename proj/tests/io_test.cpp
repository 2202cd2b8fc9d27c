// Copyright 2026 The Pathforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <filesystem>

#include "pathforge/json_io.hpp"

namespace pathforge::io {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("pathforge_io_test_" + name);
}

TrainSample random_sample(int res, std::uint64_t seed) {
  CounterRng rng(seed);
  TrainSample s;
  s.template_id = rng.uniform_int(0, 9);
  s.variant_seed = rng.next_u64();
  // Multiples of 2^-20 survive the f32 round trip exactly.
  auto dyadic = [&] { return rng.uniform_int(0, 1 << 20) / static_cast<double>(1 << 20); };
  s.action.x = dyadic();
  s.action.y = dyadic();
  s.action.r = dyadic();
  s.scene.resolution = res;
  for (auto& c : s.scene.channels) {
    c = PathMap(res, res);
    for (auto& v : c.data) v = rng.coin() ? 1.0f : 0.0f;
  }
  for (auto* m : {&s.gt_base, &s.gt_target, &s.gt_action, &s.gt_placement}) {
    *m = PathMap(res, res);
    for (auto& v : m->data) v = rng.uniform() < 0.1 ? 1.0f : 0.0f;
  }
  return s;
}

TEST(Dataset, RoundTripsHundredSamples) {
  std::vector<TrainSample> samples;
  for (int i = 0; i < 100; ++i) samples.push_back(random_sample(64, i));
  const auto path = temp_path("rt.pfrd");
  save_dataset(path, samples);
  const auto loaded = load_dataset(path);
  ASSERT_EQ(loaded.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ASSERT_EQ(loaded[i], samples[i]) << i;
  }
  EXPECT_EQ(encode_dataset(loaded), read_file(path));
  fs::remove(path);
}

TEST(Dataset, SizeClosedForm) {
  std::vector<TrainSample> samples;
  for (int i = 0; i < 7; ++i) samples.push_back(random_sample(64, i));
  EXPECT_EQ(sample_bytes(64, 64), 24u + 9u * 64u * 8u);
  EXPECT_EQ(encode_dataset(samples).size(), 14u + 7u * (24u + 9u * 512u));
  EXPECT_EQ(encode_dataset(samples).size(), dataset_bytes(7, 64, 64));
}

TEST(Dataset, RowsPadToWholeBytes) {
  // 4-wide rows occupy one byte each, high nibble first.
  TrainSample s = random_sample(4, 1);
  for (auto& c : s.scene.channels) c = PathMap(4, 4);
  s.scene.channels[0].at(0, 0) = 1.0f;
  s.scene.channels[0].at(1, 3) = 1.0f;
  const Bytes b = encode_dataset(std::vector<TrainSample>{s});
  EXPECT_EQ(b.size(), dataset_bytes(1, 4, 4));
  EXPECT_EQ(b[14 + 24 + 0], 0x80);
  EXPECT_EQ(b[14 + 24 + 1], 0x10);
  EXPECT_EQ(decode_dataset(b)[0], s);
}

TEST(Dataset, TruncatedMidSampleReportsIndex) {
  std::vector<TrainSample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(random_sample(16, i));
  Bytes b = encode_dataset(samples);
  b.resize(dataset_bytes(3, 16, 16) + 10);
  try {
    decode_dataset(b);
    FAIL() << "expected TruncatedFile";
  } catch (const TruncatedFile& e) {
    EXPECT_EQ(e.sample_index, 3);
    EXPECT_EQ(e.kind(), "TruncatedFile");
  }
  b.resize(9);
  EXPECT_THROW(decode_dataset(b), TruncatedFile);
}

TEST(Dataset, RejectsBadHeaders) {
  Bytes b = encode_dataset(std::vector<TrainSample>{random_sample(8, 1)});
  Bytes bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_dataset(bad), BadMagic);
  bad = b;
  bad[4] = 9;
  EXPECT_THROW(decode_dataset(bad), VersionUnsupported);
  bad = b;
  bad.push_back(0);
  EXPECT_THROW(decode_dataset(bad), TrailingBytes);
}

TEST(Dataset, MixedResolutionsRejected) {
  std::vector<TrainSample> samples{random_sample(8, 1), random_sample(16, 2)};
  EXPECT_THROW(encode_dataset(samples), ShapeMismatch);
}

TEST(Checkpoint, RoundTripIsByteAndBitExact) {
  Model m(ModelConfig{64, 16, 42});
  const auto path = temp_path("rt.pfwt");
  save_checkpoint(path, m);
  Model loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config, m.config);
  EXPECT_EQ(encode_checkpoint(loaded), read_file(path));

  const auto s = random_sample(64, 3);
  const Prediction a = predict(m, s.scene), b = predict(loaded, s.scene);
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.placement, b.placement);
  fs::remove(path);
}

TEST(Checkpoint, ResolutionMismatch) {
  Model m(ModelConfig{64, 16, 1});
  const Bytes b = encode_checkpoint(m);
  ModelConfig want{128, 16, 1};
  EXPECT_THROW(decode_checkpoint(b, &want), ShapeMismatch);
  want.resolution = 64;
  EXPECT_NO_THROW(decode_checkpoint(b, &want));
}

TEST(Checkpoint, RejectsCorruption) {
  Model m(ModelConfig{8, 16, 1});
  Bytes b = encode_checkpoint(m);
  Bytes bad = b;
  bad[1] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), BadMagic);
  bad = b;
  bad.resize(b.size() / 2);
  EXPECT_THROW(decode_checkpoint(bad), TruncatedFile);
  bad = b;
  bad[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad), VersionUnsupported);
}

TEST(Suite, JsonRoundTripIsExact) {
  Suite s;
  s.config.n_templates = 3;
  s.config.variants_per_template = 1;
  s.config.seed = 77;
  for (int t = 0; t < 3; ++t) {
    SuiteTask st{instantiate_task(get_template(t), 1000 + t, 0), {0.1, 0.2, 0.3}};
    s.tasks.push_back(st);
  }
  const auto path = temp_path("suite.json");
  save_suite(path, s);
  const Suite loaded = load_suite(path);
  ASSERT_EQ(loaded.tasks.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(loaded.tasks[t].task, s.tasks[t].task);
    EXPECT_EQ(loaded.tasks[t].witness, s.tasks[t].witness);
  }
  EXPECT_EQ(loaded.config.seed, 77u);
  EXPECT_EQ(loaded.ids(), s.ids());
  fs::remove(path);
}

TEST(Suite, NotAManifest) {
  const auto path = temp_path("junk.json");
  const std::string text = "{\"hello\": 1}";
  write_file(path, Bytes(text.begin(), text.end()));
  EXPECT_THROW(load_suite(path), DataError);
  EXPECT_THROW(load_suite(temp_path("missing.json")), DataError);
  fs::remove(path);
}

TEST(Report, TableMarksMissingTemplates) {
  EvalReport r;
  r.per_template[0] = {62.0, 66.0, 4};
  r.per_template[2] = {31.0, 31.0, 4};
  r.mean_auccess = 46.5;
  r.mean_solved_within_10 = 48.5;
  const std::string t = report_table(r, 3);
  EXPECT_NE(t.find("auc."), std::string::npos);
  EXPECT_NE(t.find("perc."), std::string::npos);
  EXPECT_NE(t.find("   62.0      -   31.0   46.5"), std::string::npos) << t;
  const json j = to_json(r);
  EXPECT_DOUBLE_EQ(j["per_template"]["2"]["auccess"].get<double>(), 31.0);
}

}  // namespace
}  // namespace pathforge::io
