#include "coverdet/config.hpp"

#include <charconv>
#include <sstream>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"

namespace coverdet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    parts.push_back(trim(s.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorCode::kInvalidParam,
         "config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorCode::kInvalidParam, "config key '" + std::string(key) + "': expected a boolean");
}

}  // namespace

KeyValues parse_key_values(std::string_view text, std::string_view origin) {
  KeyValues values;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kInvalidParam, std::string(origin) + ":" + std::to_string(line_no) +
                                         ": expected key=value");
    }
    values.insert_or_assign(std::string(trim(line.substr(0, eq))),
                            std::string(trim(line.substr(eq + 1))));
  }
  return values;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_key_values(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                          path.string());
}

void apply_overrides(const KeyValues& values, PipelineConfig& config) {
  for (const auto& [key, value] : values) {
    if (key == "batch_size") {
      config.train.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "epochs") {
      config.train.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "dropout_rate") {
      config.train.dropout_rate = parse_number<double>(key, value);
    } else if (key == "l2_lambda") {
      config.train.l2_lambda = parse_number<double>(key, value);
    } else if (key == "lr") {
      config.train.lr = parse_number<double>(key, value);
    } else if (key == "seed") {
      config.seed = parse_number<std::uint64_t>(key, value);
      config.train.seed = config.seed;
    } else if (key == "eval_batch_size") {
      config.train.eval_batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "holdout") {
      config.holdout = parse_number<std::size_t>(key, value);
    } else if (key == "split_by_clique") {
      config.split_by_clique = parse_bool(key, value);
    } else if (key == "conv_layers") {
      config.arch.conv_layers.clear();
      for (auto layer : split(value, ',')) {
        const auto dims = split(layer, 'x');
        if (dims.size() != 3) {
          fail(ErrorCode::kInvalidParam, "conv_layers entries look like 64x5x5, got '" +
                                             std::string(layer) + "'");
        }
        config.arch.conv_layers.push_back({parse_number<std::size_t>(key, dims[0]),
                                           parse_number<std::size_t>(key, dims[1]),
                                           parse_number<std::size_t>(key, dims[2])});
      }
    } else if (key == "fc_widths") {
      config.arch.fc_widths.clear();
      for (auto w : split(value, ',')) config.arch.fc_widths.push_back(parse_number<std::size_t>(key, w));
    } else if (key == "input_frames") {
      config.arch.input_frames = parse_number<std::size_t>(key, value);
    } else if (key == "input_bins") {
      config.arch.input_bins = parse_number<std::size_t>(key, value);
    } else if (key == "alpha_init") {
      config.arch.alpha_init = parse_number<double>(key, value);
    } else if (key == "hop") {
      config.hop_samples = parse_number<int>(key, value);
    } else if (key == "sample_rate") {
      config.sample_rate_hz = parse_number<int>(key, value);
    } else {
      fail(ErrorCode::kInvalidParam, "unknown config key '" + key + "'");
    }
  }
  config.train.validate();
  config.arch.validate();
}

std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers) {
  std::ostringstream out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out << ',';
    out << layers[i].filters << 'x' << layers[i].kernel_h << 'x' << layers[i].kernel_w;
  }
  return out.str();
}

}  // namespace coverdet
