#include "aigi/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "aigi/common.hpp"
#include "json.hpp"

namespace aigi {

namespace {

enum Param : std::size_t {
  kConv1W,
  kConv1B,
  kConv2W,
  kConv2B,
  kConv3W,
  kConv3B,
  kImageProj,
  kTokenEmbedding,
  kTextProj,
  kLogitScale,
  kParamCount
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

// 3x3 convolution, zero padding 1, stride 1. Planar layouts.
void conv3x3(const double* in, int cin, int h, int w, const double* weight, const double* bias, int cout,
             double* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < cout; ++co) {
    double* o = out + co * plane;
    std::fill(o, o + plane, bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in + ci * plane;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double k = weight[((co * cin + ci) * 3 + ky) * 3 + kx];
          const int dy = ky - 1, dx = kx - 1;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y) {
            double* orow = o + y * w;
            const double* irow = src + (y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += k * irow[x];
          }
        }
    }
  }
}

void conv3x3_backward(const double* in, int cin, int h, int w, const double* weight, int cout,
                      const double* d_out, double* d_in, double* d_weight, double* d_bias) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < cout; ++co) {
    const double* g = d_out + co * plane;
    double bsum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
    d_bias[co] += bsum;
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in + ci * plane;
      double* dsrc = d_in ? d_in + ci * plane : nullptr;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((co * cin + ci) * 3 + ky) * 3 + kx;
          const double k = weight[widx];
          const int dy = ky - 1, dx = kx - 1;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + y * w;
            const double* irow = src + (y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            if (dsrc) {
              double* drow = dsrc + (y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) drow[x] += k * grow[x];
            }
          }
          d_weight[widx] += acc;
        }
    }
  }
}

std::vector<double> avgpool2(const std::vector<double>& in, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double* p = in.data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * x;
        out[(static_cast<std::size_t>(ch) * oh + y) * ow + x] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return out;
}

std::vector<double> avgpool2_backward(const std::vector<double>& d_out, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> d_in(static_cast<std::size_t>(c) * h * w, 0.0);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double g = 0.25 * d_out[(static_cast<std::size_t>(ch) * oh + y) * ow + x];
        double* p = d_in.data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * x;
        p[0] += g;
        p[1] += g;
        p[w] += g;
        p[w + 1] += g;
      }
  return d_in;
}

Parameter make_param(std::string name, std::vector<std::size_t> shape, bool decay = true) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return Parameter{std::move(name), std::move(shape), std::vector<double>(n, 0.0), decay};
}

void fill_normal(Parameter& p, Rng& rng, double stddev) {
  for (auto& v : p.value) v = stddev * rng.normal();
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(c));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

void validate_config(const TinyBackboneConfig& c) {
  if (c.resolution <= 0 || c.resolution % 4 != 0)
    fail(ErrorKind::Config, "tiny backbone resolution must be a positive multiple of 4");
  if (c.embed_dim <= 0 || c.token_dim <= 0 || c.context_length <= 0)
    fail(ErrorKind::Config, "tiny backbone dimensions must be positive");
  for (int ch : c.conv_channels)
    if (ch <= 0) fail(ErrorKind::Config, "tiny backbone channel counts must be positive");
}

}  // namespace

// ---------------------------------------------------------------- tokenizer

Tokenizer::Tokenizer(std::vector<std::string> words, std::size_t context_length)
    : words_(std::move(words)), context_length_(context_length) {
  if (context_length_ == 0) fail(ErrorKind::Config, "tokenizer context length must be positive");
}

Tokenizer Tokenizer::from_captions(std::span<const std::string> captions, std::size_t context_length) {
  std::vector<std::string> words;
  for (const auto& caption : captions)
    for (auto& w : split_words(caption))
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(std::move(w));
  return Tokenizer(std::move(words), context_length);
}

TokenSequence Tokenizer::encode(std::string_view caption) const {
  const auto words = split_words(caption);
  if (words.empty()) fail(ErrorKind::InvalidArgument, "tokenization error: empty caption");
  if (words.size() > context_length_)
    fail(ErrorKind::InvalidArgument, "tokenization error: caption has " + std::to_string(words.size()) +
                                         " tokens, context limit is " + std::to_string(context_length_) +
                                         ": '" + std::string(caption) + "'");
  TokenSequence seq;
  seq.ids.assign(context_length_, pad_id);
  seq.length = words.size();
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto it = std::find(words_.begin(), words_.end(), words[i]);
    seq.ids[i] = it == words_.end() ? unk_id : static_cast<int>(it - words_.begin()) + 2;
  }
  return seq;
}

// ---------------------------------------------------------------- bundle

EncoderBundle EncoderBundle::create_tiny(const TinyBackboneConfig& config, const Registry& registry,
                                         std::uint64_t seed) {
  validate_config(config);
  EncoderBundle b;
  b.config_ = config;
  std::vector<std::string> captions;
  for (const auto& c : registry.classes()) captions.push_back(registry.caption_for(c.class_id, config.caption_prefix));
  b.tokenizer_ = Tokenizer::from_captions(captions, static_cast<std::size_t>(config.context_length));
  b.registry_fingerprint_ = registry.fingerprint();

  const auto c = config.conv_channels;
  const std::size_t d = static_cast<std::size_t>(config.embed_dim);
  const std::size_t e = static_cast<std::size_t>(config.token_dim);
  const std::size_t in_ch[3] = {3, static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[1])};
  b.params_.reserve(kParamCount);
  for (int l = 0; l < 3; ++l) {
    const auto name = "conv" + std::to_string(l + 1);
    b.params_.push_back(make_param(name + ".weight", {static_cast<std::size_t>(c[l]), in_ch[l], 3, 3}));
    b.params_.push_back(make_param(name + ".bias", {static_cast<std::size_t>(c[l])}));
  }
  b.params_.push_back(make_param("image_projection", {d, static_cast<std::size_t>(c[2])}));
  b.params_.push_back(make_param("token_embedding", {b.tokenizer_.vocab_size(), e}));
  b.params_.push_back(make_param("text_projection", {d, e}));
  b.params_.push_back(make_param("logit_scale", {1}, false));

  Rng rng(seed);
  for (int l = 0; l < 3; ++l) fill_normal(b.params_[kConv1W + 2 * l], rng, std::sqrt(2.0 / (in_ch[l] * 9.0)));
  fill_normal(b.params_[kImageProj], rng, 1.0 / std::sqrt(static_cast<double>(c[2])));
  fill_normal(b.params_[kTokenEmbedding], rng, 1.0);
  fill_normal(b.params_[kTextProj], rng, 1.0 / std::sqrt(static_cast<double>(e)));
  b.params_[kLogitScale].value[0] = std::log(1.0 / 0.07);
  return b;
}

double EncoderBundle::logit_scale() const { return params_[kLogitScale].value[0]; }

void EncoderBundle::set_logit_scale(double value) {
  params_[kLogitScale].value[0] = value;
  clamp_logit_scale();
}

void EncoderBundle::clamp_logit_scale() {
  auto& s = params_[kLogitScale].value[0];
  s = std::min(s, std::log(kMaxLogitScale));
}

std::size_t EncoderBundle::parameter_index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  fail(ErrorKind::Lookup, "no parameter named '" + std::string(name) + "'");
}

Vector EncoderBundle::raw_image_embedding(const ImageArray& image, ImageTrace* trace) const {
  const int res = config_.resolution;
  if (image.height != res || image.width != res || image.values.size() != image.plane() * 3)
    fail(ErrorKind::Shape, "image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                               ", encoder expects " + std::to_string(res) + "x" + std::to_string(res));
  ImageTrace local;
  ImageTrace& t = trace ? *trace : local;
  t.input = image;
  const auto ch = config_.conv_channels;
  const int in_ch[3] = {3, ch[0], ch[1]};
  int h = res;
  const std::vector<double>* input = &image.values;
  for (int l = 0; l < 3; ++l) {
    const std::size_t n = static_cast<std::size_t>(ch[l]) * h * h;
    t.pre[l].assign(n, 0.0);
    conv3x3(input->data(), in_ch[l], h, h, params_[kConv1W + 2 * l].value.data(),
            params_[kConv1B + 2 * l].value.data(), ch[l], t.pre[l].data());
    t.post[l].resize(n);
    for (std::size_t i = 0; i < n; ++i) t.post[l][i] = silu(t.pre[l][i]);
    if (l < 2) {
      t.pooled[l] = avgpool2(t.post[l], ch[l], h, h);
      input = &t.pooled[l];
      h /= 2;
    }
  }
  const std::size_t plane = static_cast<std::size_t>(h) * h;
  t.feature.assign(static_cast<std::size_t>(ch[2]), 0.0);
  for (int c = 0; c < ch[2]; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += t.post[2][c * plane + i];
    t.feature[c] = s / static_cast<double>(plane);
  }
  const auto& w = params_[kImageProj].value;
  const std::size_t d = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t f = t.feature.size();
  Vector raw(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < f; ++j) raw[i] += w[i * f + j] * t.feature[j];
  return raw;
}

void EncoderBundle::backward_image(const ImageTrace& t, const Vector& d_raw, Gradients& grads) const {
  const auto ch = config_.conv_channels;
  const int in_ch[3] = {3, ch[0], ch[1]};
  const std::size_t d = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t f = t.feature.size();
  const auto& w = params_[kImageProj].value;
  auto& gw = grads[kImageProj];
  Vector d_feature(f, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      gw[i * f + j] += d_raw[i] * t.feature[j];
      d_feature[j] += w[i * f + j] * d_raw[i];
    }

  int h = config_.resolution / 4;
  std::vector<double> d_post(static_cast<std::size_t>(ch[2]) * h * h);
  const std::size_t plane = static_cast<std::size_t>(h) * h;
  for (int c = 0; c < ch[2]; ++c)
    for (std::size_t i = 0; i < plane; ++i) d_post[c * plane + i] = d_feature[c] / static_cast<double>(plane);

  for (int l = 2; l >= 0; --l) {
    std::vector<double> d_pre(d_post.size());
    for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre[i] = d_post[i] * silu_grad(t.pre[l][i]);
    const std::vector<double>& input = l == 0 ? t.input.values : t.pooled[l - 1];
    std::vector<double> d_input;
    if (l > 0) d_input.assign(input.size(), 0.0);
    conv3x3_backward(input.data(), in_ch[l], h, h, params_[kConv1W + 2 * l].value.data(), ch[l], d_pre.data(),
                     l > 0 ? d_input.data() : nullptr, grads[kConv1W + 2 * l].data(),
                     grads[kConv1B + 2 * l].data());
    if (l > 0) {
      d_post = avgpool2_backward(d_input, ch[l - 1], h * 2, h * 2);
      h *= 2;
    }
  }
}

Vector EncoderBundle::raw_text_embedding(std::string_view caption, TextTrace* trace) const {
  TextTrace local;
  TextTrace& t = trace ? *trace : local;
  t.tokens = tokenizer_.encode(caption);
  const std::size_t e = static_cast<std::size_t>(config_.token_dim);
  const auto& table = params_[kTokenEmbedding].value;
  t.feature.assign(e, 0.0);
  for (std::size_t k = 0; k < t.tokens.length; ++k) {
    const std::size_t id = static_cast<std::size_t>(t.tokens.ids[k]);
    for (std::size_t j = 0; j < e; ++j) t.feature[j] += table[id * e + j];
  }
  for (auto& v : t.feature) v /= static_cast<double>(t.tokens.length);
  const std::size_t d = static_cast<std::size_t>(config_.embed_dim);
  const auto& w = params_[kTextProj].value;
  Vector raw(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < e; ++j) raw[i] += w[i * e + j] * t.feature[j];
  return raw;
}

void EncoderBundle::backward_text(const TextTrace& t, const Vector& d_raw, Gradients& grads) const {
  const std::size_t e = static_cast<std::size_t>(config_.token_dim);
  const std::size_t d = static_cast<std::size_t>(config_.embed_dim);
  const auto& w = params_[kTextProj].value;
  auto& gw = grads[kTextProj];
  Vector d_feature(e, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < e; ++j) {
      gw[i * e + j] += d_raw[i] * t.feature[j];
      d_feature[j] += w[i * e + j] * d_raw[i];
    }
  auto& gtable = grads[kTokenEmbedding];
  const double inv = 1.0 / static_cast<double>(t.tokens.length);
  for (std::size_t k = 0; k < t.tokens.length; ++k) {
    const std::size_t id = static_cast<std::size_t>(t.tokens.ids[k]);
    for (std::size_t j = 0; j < e; ++j) gtable[id * e + j] += d_feature[j] * inv;
  }
}

std::vector<Embedding> EncoderBundle::embed_images(std::span<const ImageArray> images) const {
  std::vector<Embedding> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(normalized(raw_image_embedding(img)));
  return out;
}

std::vector<Embedding> EncoderBundle::embed_texts(std::span<const std::string> captions) const {
  std::vector<Embedding> out;
  out.reserve(captions.size());
  for (const auto& c : captions) out.push_back(normalized(raw_text_embedding(c)));
  return out;
}

bool EncoderBundle::operator==(const EncoderBundle& o) const {
  if (backbone_ != o.backbone_ || registry_fingerprint_ != o.registry_fingerprint_) return false;
  if (config_.resolution != o.config_.resolution || config_.embed_dim != o.config_.embed_dim ||
      config_.conv_channels != o.config_.conv_channels || config_.token_dim != o.config_.token_dim ||
      config_.context_length != o.config_.context_length || config_.caption_prefix != o.config_.caption_prefix)
    return false;
  if (tokenizer_.words() != o.tokenizer_.words()) return false;
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = o.params_[i];
    if (a.name != b.name || a.shape != b.shape || a.decay != b.decay) return false;
    if (a.value.size() != b.value.size() ||
        std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------- checkpoint
//
// Layout (little-endian):
//   "AIGICKPT" u32 version u64 metadata_len <metadata json>
//   u32 tensor_count, per tensor: u32 name_len <name> u32 ndim u64 dims[ndim] u8 decay f64 values[]

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'I', 'G', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorKind::Io, "truncated checkpoint: " + path);
  return v;
}

}  // namespace

void EncoderBundle::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["backbone"] = backbone_;
  meta["embedding_dim"] = config_.embed_dim;
  meta["resolution"] = config_.resolution;
  meta["registry_fingerprint"] = registry_fingerprint_;
  meta["logit_scale"] = logit_scale();
  meta["conv_channels"] = config_.conv_channels;
  meta["token_dim"] = config_.token_dim;
  meta["context_length"] = config_.context_length;
  meta["caption_prefix"] = config_.caption_prefix;
  meta["vocabulary"] = tokenizer_.words();
  const std::string meta_text = meta.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(meta_text.size()));
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    put(out, static_cast<std::uint32_t>(params_.size()));
    for (const auto& p : params_) {
      put(out, static_cast<std::uint32_t>(p.name.size()));
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put(out, static_cast<std::uint32_t>(p.shape.size()));
      for (auto s : p.shape) put(out, static_cast<std::uint64_t>(s));
      put(out, static_cast<std::uint8_t>(p.decay ? 1 : 0));
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

EncoderBundle EncoderBundle::load(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint: " + where);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    fail(ErrorKind::Io, "not a checkpoint file: " + where);
  if (get<std::uint32_t>(in, where) != kVersion) fail(ErrorKind::Io, "unsupported checkpoint version: " + where);
  const auto meta_len = get<std::uint64_t>(in, where);
  if (meta_len > (1u << 26)) fail(ErrorKind::Io, "corrupt checkpoint metadata: " + where);
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), static_cast<std::streamsize>(meta_len)))
    fail(ErrorKind::Io, "truncated checkpoint: " + where);

  EncoderBundle b;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    b.backbone_ = meta.at("backbone").get<std::string>();
    b.config_.embed_dim = meta.at("embedding_dim").get<int>();
    b.config_.resolution = meta.at("resolution").get<int>();
    b.config_.conv_channels = meta.at("conv_channels").get<std::array<int, 3>>();
    b.config_.token_dim = meta.at("token_dim").get<int>();
    b.config_.context_length = meta.at("context_length").get<int>();
    b.config_.caption_prefix = meta.at("caption_prefix").get<bool>();
    b.registry_fingerprint_ = meta.at("registry_fingerprint").get<std::string>();
    b.tokenizer_ = Tokenizer(meta.at("vocabulary").get<std::vector<std::string>>(),
                             static_cast<std::size_t>(b.config_.context_length));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, "corrupt checkpoint metadata in " + where + ": " + e.what());
  }
  validate_config(b.config_);

  const auto count = get<std::uint32_t>(in, where);
  if (count != kParamCount) fail(ErrorKind::Io, "unexpected tensor count in " + where);
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    const auto name_len = get<std::uint32_t>(in, where);
    if (name_len > 4096) fail(ErrorKind::Io, "corrupt tensor name in " + where);
    p.name.resize(name_len);
    if (!in.read(p.name.data(), name_len)) fail(ErrorKind::Io, "truncated checkpoint: " + where);
    const auto ndim = get<std::uint32_t>(in, where);
    if (ndim > 8) fail(ErrorKind::Io, "corrupt tensor rank in " + where);
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      p.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, where)));
      n *= p.shape.back();
    }
    if (n > (1u << 28)) fail(ErrorKind::Io, "corrupt tensor size in " + where);
    p.decay = get<std::uint8_t>(in, where) != 0;
    p.value.resize(n);
    if (!in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(n * sizeof(double))))
      fail(ErrorKind::Io, "truncated checkpoint: " + where);
    b.params_.push_back(std::move(p));
  }

  // shapes must agree with the declared architecture
  const auto c = b.config_.conv_channels;
  const std::size_t in_ch[3] = {3, static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[1])};
  const std::size_t d = static_cast<std::size_t>(b.config_.embed_dim);
  const std::size_t e = static_cast<std::size_t>(b.config_.token_dim);
  const std::vector<std::vector<std::size_t>> expected = {
      {static_cast<std::size_t>(c[0]), in_ch[0], 3, 3}, {static_cast<std::size_t>(c[0])},
      {static_cast<std::size_t>(c[1]), in_ch[1], 3, 3}, {static_cast<std::size_t>(c[1])},
      {static_cast<std::size_t>(c[2]), in_ch[2], 3, 3}, {static_cast<std::size_t>(c[2])},
      {d, static_cast<std::size_t>(c[2])},              {b.tokenizer_.vocab_size(), e},
      {d, e},                                           {1}};
  for (std::size_t i = 0; i < kParamCount; ++i)
    if (b.params_[i].shape != expected[i])
      fail(ErrorKind::Io, "tensor '" + b.params_[i].name + "' has an unexpected shape in " + where);
  return b;
}

// ---------------------------------------------------------------- similarity

Matrix similarity_logits(std::span<const Embedding> images, std::span<const Embedding> texts, double logit_scale) {
  const double scale = std::exp(logit_scale);
  Matrix out(images.size(), texts.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = 0; j < texts.size(); ++j) out(i, j) = scale * dot(images[i], texts[j]);
  return out;
}

// ---------------------------------------------------------------- backbones

namespace {

std::mutex& loader_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, BackboneLoader>& loaders() {
  static std::map<std::string, BackboneLoader> m;
  return m;
}

}  // namespace

void register_backbone_loader(const std::string& name, BackboneLoader loader) {
  std::lock_guard lock(loader_mutex());
  loaders()[name] = std::move(loader);
}

EncoderBundle make_bundle(std::string_view backbone, const std::filesystem::path& weights, const Registry& registry,
                          const TinyBackboneConfig& config, std::uint64_t seed) {
  if (backbone.empty() || backbone == "tiny") return EncoderBundle::create_tiny(config, registry, seed);
  BackboneLoader loader;
  {
    std::lock_guard lock(loader_mutex());
    if (auto it = loaders().find(std::string(backbone)); it != loaders().end()) loader = it->second;
  }
  if (!loader) {
    log_info("backbone '" + std::string(backbone) + "' has no loader; using the tiny reference backbone");
  } else if (weights.empty() || !std::filesystem::exists(weights)) {
    log_info("weights for backbone '" + std::string(backbone) + "' not found at '" + weights.string() +
             "'; using the tiny reference backbone");
  } else if (auto bundle = loader(weights, registry, config)) {
    return std::move(*bundle);
  } else {
    log_info("loader for backbone '" + std::string(backbone) + "' declined '" + weights.string() +
             "'; using the tiny reference backbone");
  }
  return EncoderBundle::create_tiny(config, registry, seed);
}

}  // namespace aigi
