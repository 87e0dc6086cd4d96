#include "coverdet/checkpoint.hpp"

#include <cstring>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"

namespace coverdet {
namespace {

constexpr char kCkptMagic[4] = {'C', 'K', 'P', 'T'};
constexpr char kAdamMagic[4] = {'A', 'D', 'A', 'M'};

void check_magic(std::span<const std::uint8_t> bytes, const char (&magic)[4],
                 const std::string& what) {
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), magic, head) != 0) {
    fail(ErrorCode::kFormatVersionMismatch,
         what + ": bad magic (expected " + std::string(magic, 4) + ")");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params) {
  ByteWriter w;
  w.put_bytes(std::string_view(kCkptMagic, 4));
  w.put_u32(kCheckpointVersion);
  w.put_u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_u32(static_cast<std::uint32_t>(p.name.size()));
    w.put_bytes(p.name);
    w.put_u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.put_u32(static_cast<std::uint32_t>(d));
    w.put_f32_array(p.tensor.values());
  }
  seal_with_crc(w);
  return std::move(w.bytes());
}

std::vector<Parameter> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kCkptMagic, "checkpoint");
  ByteReader r(verify_crc(bytes, "checkpoint"));
  r.get_bytes(4);
  if (const auto version = r.get_u32(); version != kCheckpointVersion) {
    fail(ErrorCode::kFormatVersionMismatch, "checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.get_u32();
  std::vector<Parameter> params;
  params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = r.get_bytes(r.get_u32());
    Shape shape(r.get_u32());
    for (auto& d : shape) d = r.get_u32();
    std::vector<float> values(shape_size(shape));
    r.get_f32_array(values);
    p.tensor = Tensor(std::move(shape), std::move(values), true);
    params.push_back(std::move(p));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const SiameseModel& model) {
  write_file_atomic(path, encode_checkpoint(model.parameters()));
}

ArchitectureConfig infer_architecture(std::span<const Parameter> params,
                                      std::size_t input_frames, std::size_t input_bins) {
  ArchitectureConfig config;
  config.conv_layers.clear();
  config.fc_widths.clear();
  config.input_frames = input_frames;
  config.input_bins = input_bins;
  for (const auto& p : params) {
    const auto& s = p.tensor.shape();
    if (p.name.starts_with("conv") && p.name.ends_with(".kernel") && s.size() == 4) {
      config.conv_layers.push_back({s[0], s[2], s[3]});
    } else if (p.name.starts_with("fc") && p.name.ends_with(".weight") && s.size() == 2) {
      config.fc_widths.push_back(s[1]);
    }
  }
  if (config.conv_layers.empty() || config.fc_widths.empty()) {
    fail(ErrorCode::kDimMismatch, "checkpoint lacks conv or FC layers");
  }
  const std::size_t flat = shape_size(config.feature_map_shape());
  for (const auto& p : params) {
    if (p.name == "fc0.weight" && p.tensor.dim(0) != flat) {
      fail(ErrorCode::kDimMismatch,
           "checkpoint expects " + std::to_string(p.tensor.dim(0)) +
               " flattened features but an input of " + std::to_string(input_bins) + "x" +
               std::to_string(input_frames) + " gives " + std::to_string(flat));
    }
  }
  return config;
}

SiameseModel load_checkpoint(const std::filesystem::path& path, std::size_t input_frames,
                             std::size_t input_bins) {
  auto params = decode_checkpoint(read_file(path));
  const auto config = infer_architecture(params, input_frames, input_bins);
  return SiameseModel::from_parameters(config, std::move(params));
}

void save_adam_state(const std::filesystem::path& path, const AdamState& state) {
  ByteWriter w;
  w.put_bytes(std::string_view(kAdamMagic, 4));
  w.put_u32(kCheckpointVersion);
  w.put_u64(state.step);
  w.put_f64(state.config.lr);
  w.put_f64(state.config.beta1);
  w.put_f64(state.config.beta2);
  w.put_f64(state.config.eps);
  w.put_f64(state.config.l2_lambda);
  w.put_u32(static_cast<std::uint32_t>(state.m.size()));
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    w.put_u32(static_cast<std::uint32_t>(state.m[i].size()));
    w.put_f32_array(state.m[i]);
    w.put_f32_array(state.v[i]);
  }
  seal_with_crc(w);
  write_file_atomic(path, w.bytes());
}

AdamState load_adam_state(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  check_magic(bytes, kAdamMagic, path.string());
  ByteReader r(verify_crc(bytes, path.string()));
  r.get_bytes(4);
  if (const auto version = r.get_u32(); version != kCheckpointVersion) {
    fail(ErrorCode::kFormatVersionMismatch, "optimizer state version " + std::to_string(version));
  }
  AdamState state;
  state.step = r.get_u64();
  state.config.lr = r.get_f64();
  state.config.beta1 = r.get_f64();
  state.config.beta2 = r.get_f64();
  state.config.eps = r.get_f64();
  state.config.l2_lambda = r.get_f64();
  const std::uint32_t count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t n = r.get_u32();
    state.m.emplace_back(n);
    state.v.emplace_back(n);
    r.get_f32_array(state.m.back());
    r.get_f32_array(state.v.back());
  }
  return state;
}

}  // namespace coverdet
