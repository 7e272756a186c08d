// Copyright 2026 The CSI-NTC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "csi_ntc/channel.hpp"
#include "csi_ntc/weights_io.hpp"

namespace csi_ntc {
namespace {

// Bytes produced by an independent struct.pack of the documented layouts.
const std::vector<uint8_t> kGoldenTensorFile{
    0x43, 0x53, 0x49, 0x54, 0x01, 0x01, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x40, 0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0x80, 0xbf};

const std::vector<uint8_t> kGoldenWeightFile{
    0x43, 0x53, 0x49, 0x57, 0x01, 0x00, 0x01, 0x00, 0x01, 0x00, 0x02, 0x00, 0x01, 0x00,
    0x01, 0x00, 0x00, 0x00, 0x04, 0x02, 0x04, 0x02, 0x08, 0x00, 0x00, 0x00, 0x02, 0x02,
    0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x40, 0xfc, 0xa9, 0xf1, 0xd2, 0x4d, 0x62, 0x50, 0x3f, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0xb0, 0x3f, 0x06, 0x01, 0x00, 0x07, 0x00, 0x65, 0x6e, 0x74, 0x72,
    0x6f, 0x70, 0x79, 0x02, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x80, 0x3e, 0x00, 0x00, 0x80, 0xbf, 0x00, 0x00, 0x00, 0xbf, 0x00, 0x00, 0x00, 0x00};

TEST(TensorFile, GoldenLayout) {
  const ChannelTensor t{Tensor3<double>(Shape3{2, 1, 1}, std::vector<double>{0.5, -1.0}), {0.0, 2.0}};
  EXPECT_EQ(serialize_tensor_file(std::vector{t}, 1, 1), kGoldenTensorFile);
  const auto back = parse_tensor_file(kGoldenTensorFile);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].planes, t.planes);
  EXPECT_EQ(back[0].scale, t.scale);
}

TEST(TensorFile, RoundtripThroughDisk) {
  ChannelConfig cfg;
  cfg.n_tx = 4;
  cfg.n_subcarriers = 32;
  cfg.n_delay = 8;
  cfg.n_paths = 3;
  const auto data = generate_dataset(cfg, 5);
  const auto path = std::filesystem::temp_directory_path() / "csi_ntc_formats_test.csit";
  write_tensor_file(path.string(), data, 8, 4);
  const auto back = read_tensor_file(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].scale, data[i].scale);
    for (size_t j = 0; j < data[i].planes.data.size(); ++j)
      EXPECT_EQ(back[i].planes.data[j], static_cast<double>(static_cast<float>(data[i].planes.data[j])));
  }
}

TEST(TensorFile, Errors) {
  std::vector<uint8_t> bytes = kGoldenTensorFile;
  bytes[0] = 'X';
  EXPECT_THROW(parse_tensor_file(bytes), FormatError);
  bytes = kGoldenTensorFile;
  bytes[4] = 2;
  EXPECT_THROW(parse_tensor_file(bytes), FormatError);
  bytes = kGoldenTensorFile;
  bytes.pop_back();
  EXPECT_THROW(parse_tensor_file(bytes), FormatError);
  EXPECT_THROW(parse_tensor_file(std::span(kGoldenTensorFile).first(10)), TruncationError);
  const ChannelTensor a{Tensor3<double>(Shape3{2, 1, 1}), {0.0, 1.0}};
  const ChannelTensor b{Tensor3<double>(Shape3{2, 1, 1}), {0.0, 2.0}};
  EXPECT_THROW(serialize_tensor_file(std::vector{a, b}, 1, 1), ConfigError);
  EXPECT_THROW(serialize_tensor_file(std::vector{a}, 2, 1), DimensionError);
  EXPECT_THROW(read_tensor_file("/nonexistent/dir/x.csit"), FormatError);
}

CodecModel tiny_identity_model() {
  TransformSpec spec;
  spec.arch = Architecture::identity;
  spec.n_delay = 1;
  spec.n_tx = 1;
  spec.hidden = 0;
  CodecModel m{make_transform(spec, 1, {0.0, 2.0}), {{0.25, -0.5}, {-1.0, 0.0}, {1.0 / 16, 6}, 1},
               1e-3};
  return m;
}

TEST(WeightFile, GoldenLayout) {
  const CodecModel m = tiny_identity_model();
  EXPECT_EQ(serialize_weights(m), kGoldenWeightFile);
  const CodecModel back = parse_weights(kGoldenWeightFile);
  EXPECT_EQ(back.entropy, m.entropy);
  EXPECT_EQ(back.lambda, m.lambda);
  EXPECT_EQ(back.transform.scale, m.transform.scale);
  EXPECT_EQ(back.transform.arch, Architecture::identity);
}

TEST(WeightFile, RoundtripEveryArchitecture) {
  for (Architecture a : {Architecture::identity, Architecture::linear, Architecture::mlp,
                         Architecture::swin_toy}) {
    TransformSpec spec;
    spec.arch = a;
    spec.n_delay = 8;
    spec.n_tx = 8;
    spec.latent = {10, 1, 1};
    spec.hidden = 12;
    spec.swin.patch = 2;
    spec.swin.window = 2;
    spec.swin.depths = {2, 1, 3};
    spec.swin.latent_channels = 6;
    const TransformParams t = make_transform(spec, 3, {0.1, 3.0});
    const size_t c = t.network().latent_shape().c;
    EntropyModelParams e = EntropyModelParams::initial(c, {1.0 / 32, 5});
    for (size_t i = 0; i < c; ++i) e.loc[i] = 0.125 * static_cast<double>(i);
    const CodecModel m{t, e, 0.01};
    const std::vector<uint8_t> bytes = serialize_weights(m);
    const CodecModel back = parse_weights(bytes);
    EXPECT_EQ(serialize_weights(back), bytes) << to_string(a);
    EXPECT_EQ(back.transform.swin, a == Architecture::swin_toy ? spec.swin : back.transform.swin);
    EXPECT_EQ(back.transform.network().latent_shape(), t.network().latent_shape());
    ASSERT_EQ(back.transform.weights.tensors().size(), t.weights.tensors().size());
    for (size_t k = 0; k < t.weights.tensors().size(); ++k) {
      const auto& x = t.weights.tensors()[k];
      const auto& y = back.transform.weights.tensors()[k];
      EXPECT_EQ(x.name, y.name);
      EXPECT_EQ(x.dims, y.dims);
      for (size_t i = 0; i < x.data.size(); ++i)
        EXPECT_EQ(y.data[i], static_cast<double>(static_cast<float>(x.data[i])));
    }
  }
}

TEST(WeightFile, Errors) {
  std::vector<uint8_t> bytes = kGoldenWeightFile;
  bytes[4] = 7;
  EXPECT_THROW(parse_weights(bytes), FormatError);
  bytes = kGoldenWeightFile;
  bytes[5] = 9;
  EXPECT_THROW(parse_weights(bytes), FormatError);
  bytes = kGoldenWeightFile;
  bytes.push_back(0);
  EXPECT_THROW(parse_weights(bytes), FormatError);
  EXPECT_THROW(parse_weights(std::span(kGoldenWeightFile).first(60)), TruncationError);
  // Header claims a linear layout that the tensor list does not carry.
  bytes = kGoldenWeightFile;
  bytes[5] = 1;
  EXPECT_THROW(parse_weights(bytes), FormatError);
}

}  // namespace
}  // namespace csi_ntc
