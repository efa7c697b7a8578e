#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace nsc;
using nsc::testing::TempDir;

namespace {

ModelBundle trained_looking_bundle() {
  const std::size_t hidden[] = {6, 5};
  auto b = make_bundle(nsc::testing::make_vocab(7, 4), hidden, 0.3, LossConfig{1.6, 1, 4, 0.05},
                       StoppingConfig{0.25, 9, true, true}, 42);
  // Non-trivial running statistics so they are part of the round trip.
  numkit::Rng rng(3);
  for (auto* net : {&b.symptom_net, &b.diagnosis_net})
    for (auto& l : net->layers()) {
      for (auto& v : l.running_mean.values()) v = static_cast<float>(rng.normal());
      for (auto& v : l.running_var.values()) v = static_cast<float>(rng.uniform(0.5, 2.0));
    }
  return b;
}

CheckpointError::Kind kind_of(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "checkpoint unexpectedly loaded";
  return CheckpointError::Kind::io;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir dir("ckpt");
  const auto b = trained_looking_bundle();
  save_checkpoint(b, dir / "m.nsc");
  const auto c = load_checkpoint(dir / "m.nsc");
  EXPECT_EQ(b, c);
  numkit::Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    KnownState st(7);
    for (std::size_t j = 0; j < 7; ++j) {
      const double u = rng.uniform();
      if (u < 0.3) st.reveal(j, true);
      else if (u < 0.5) st.reveal(j, false);
    }
    ASSERT_EQ(predict_diagnosis(b, st), predict_diagnosis(c, st));
    if (st.unknown_count() > 0) ASSERT_EQ(suggest_symptom(b, st, true), suggest_symptom(c, st, true));
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "m.nsc.tmp"));
}

TEST(Checkpoint, SerializationIsDeterministic) {
  EXPECT_EQ(serialize_checkpoint(trained_looking_bundle()), serialize_checkpoint(trained_looking_bundle()));
}

TEST(Checkpoint, CorruptedMagic) {
  auto bytes = serialize_checkpoint(trained_looking_bundle());
  bytes[0] = 'X';
  EXPECT_EQ(kind_of(bytes), CheckpointError::Kind::not_a_checkpoint);
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("not a checkpoint"), std::string::npos);
  }
}

TEST(Checkpoint, OlderVersion) {
  auto bytes = serialize_checkpoint(trained_looking_bundle());
  bytes[4] = 0;  // version field, little-endian u32
  EXPECT_EQ(kind_of(bytes), CheckpointError::Kind::unsupported_version);
}

TEST(Checkpoint, Truncated) {
  auto bytes = serialize_checkpoint(trained_looking_bundle());
  for (std::size_t cut : {std::size_t{6}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_EQ(kind_of(part), CheckpointError::Kind::truncated) << "cut at " << cut;
  }
}

TEST(Checkpoint, ChecksumFailure) {
  auto bytes = serialize_checkpoint(trained_looking_bundle());
  bytes[bytes.size() - 20] ^= 0x01;
  EXPECT_EQ(kind_of(bytes), CheckpointError::Kind::checksum_mismatch);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint("/nonexistent/dir/model.nsc");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::io);
  }
}

TEST(Checkpoint, HashIsStableHex) {
  const auto bytes = serialize_checkpoint(trained_looking_bundle());
  const auto h = checkpoint_hash(bytes);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, checkpoint_hash(serialize_checkpoint(trained_looking_bundle())));
}
