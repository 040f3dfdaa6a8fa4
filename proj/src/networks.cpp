#include "airmvc/networks.hpp"

#include "airmvc/rng.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace airmvc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

Parameter weight(const std::string& prefix, const char* name, std::size_t in, std::size_t out,
                 std::mt19937_64& rng) {
  return Parameter(prefix + name + ".weight", glorot_uniform(in, out, rng));
}

Parameter bias(const std::string& prefix, const char* name, std::size_t out) {
  return Parameter(prefix + name + ".bias", Matrix(1, out));
}

void require_cols(const Matrix& m, std::size_t cols, const char* op) {
  if (m.cols() != cols) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(cols) +
                         " columns, got " + m.shape_string());
  }
}

}  // namespace

ViewModel::ViewModel(const NetworkShape& shape, std::mt19937_64& rng, std::size_t view_index)
    : shape_(shape) {
  if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.latent_dim == 0 ||
      shape.projection_dim == 0 || shape.num_clusters == 0) {
    throw std::invalid_argument("ViewModel: all layer widths must be positive");
  }
  const std::string p = "view" + std::to_string(view_index + 1) + ".";
  enc1_w = weight(p, "encoder.0", shape.input_dim, shape.hidden_dim, rng);
  enc1_b = bias(p, "encoder.0", shape.hidden_dim);
  enc2_w = weight(p, "encoder.1", shape.hidden_dim, shape.latent_dim, rng);
  enc2_b = bias(p, "encoder.1", shape.latent_dim);
  dec1_w = weight(p, "decoder.0", shape.latent_dim, shape.hidden_dim, rng);
  dec1_b = bias(p, "decoder.0", shape.hidden_dim);
  dec2_w = weight(p, "decoder.1", shape.hidden_dim, shape.input_dim, rng);
  dec2_b = bias(p, "decoder.1", shape.input_dim);
  proj_w = weight(p, "projector", shape.latent_dim, shape.projection_dim, rng);
  proj_b = bias(p, "projector", shape.projection_dim);
  cls_w = weight(p, "classifier", shape.latent_dim, shape.num_clusters, rng);
  cls_b = bias(p, "classifier", shape.num_clusters);
}

std::vector<Parameter*> ViewModel::parameters() {
  return {&enc1_w, &enc1_b, &enc2_w, &enc2_b, &dec1_w, &dec1_b,
          &dec2_w, &dec2_b, &proj_w, &proj_b, &cls_w,  &cls_b};
}

std::vector<const Parameter*> ViewModel::parameters() const {
  return {&enc1_w, &enc1_b, &enc2_w, &enc2_b, &dec1_w, &dec1_b,
          &dec2_w, &dec2_b, &proj_w, &proj_b, &cls_w,  &cls_b};
}

std::vector<Parameter*> ViewModel::autoencoder_parameters() {
  return {&enc1_w, &enc1_b, &enc2_w, &enc2_b, &dec1_w, &dec1_b, &dec2_w, &dec2_b};
}

EncodeCache encode_cached(const ViewModel& model, const Matrix& x) {
  require_cols(x, model.shape().input_dim, "encode");
  EncodeCache c;
  c.input = x;
  c.hidden_pre = affine_forward(x, model.enc1_w, model.enc1_b);
  c.hidden = relu_forward(c.hidden_pre);
  c.latent = affine_forward(c.hidden, model.enc2_w, model.enc2_b);
  return c;
}

Matrix encode(const ViewModel& model, const Matrix& x) { return encode_cached(model, x).latent; }

DecodeCache decode_cached(const ViewModel& model, const Matrix& latent) {
  require_cols(latent, model.shape().latent_dim, "decode");
  DecodeCache c;
  c.latent = latent;
  c.hidden_pre = affine_forward(latent, model.dec1_w, model.dec1_b);
  c.hidden = relu_forward(c.hidden_pre);
  c.output = affine_forward(c.hidden, model.dec2_w, model.dec2_b);
  return c;
}

Matrix decode(const ViewModel& model, const Matrix& latent) {
  return decode_cached(model, latent).output;
}

Projection project(const ViewModel& model, const Matrix& latent) {
  require_cols(latent, model.shape().latent_dim, "project");
  Projection p;
  p.raw = affine_forward(latent, model.proj_w, model.proj_b);
  p.normalized = l2_normalize_rows(p.raw);
  return p;
}

Classification classify(const ViewModel& model, const Matrix& latent) {
  require_cols(latent, model.shape().latent_dim, "classify");
  Classification c;
  c.logits = affine_forward(latent, model.cls_w, model.cls_b);
  c.probs = softmax_rows(c.logits);
  return c;
}

ViewForward forward(const ViewModel& model, const Matrix& x) {
  ViewForward f;
  f.encoder = encode_cached(model, x);
  f.decoder = decode_cached(model, f.encoder.latent);
  f.projection = project(model, f.encoder.latent);
  f.classification = classify(model, f.encoder.latent);
  return f;
}

void backward(ViewModel& model, const ViewForward& fwd, const HeadGradients& grads) {
  const Matrix& latent = fwd.encoder.latent;
  Matrix d_latent(latent.rows(), latent.cols());
  bool any = false;

  if (!grads.recon.empty()) {
    const DecodeCache& d = fwd.decoder;
    Matrix g = affine_backward(grads.recon, d.hidden, model.dec2_w, model.dec2_b);
    g = relu_backward(g, d.hidden_pre);
    d_latent += affine_backward(g, d.latent, model.dec1_w, model.dec1_b);
    any = true;
  }
  if (!grads.z.empty()) {
    Matrix g = l2_normalize_backward(grads.z, fwd.projection.normalized);
    d_latent += affine_backward(g, latent, model.proj_w, model.proj_b);
    any = true;
  }
  if (!grads.probs.empty()) {
    Matrix g = softmax_backward(grads.probs, fwd.classification.probs);
    d_latent += affine_backward(g, latent, model.cls_w, model.cls_b);
    any = true;
  }
  if (!any) return;

  const EncodeCache& e = fwd.encoder;
  Matrix g = affine_backward(d_latent, e.hidden, model.enc2_w, model.enc2_b);
  g = relu_backward(g, e.hidden_pre);
  affine_backward(g, e.input, model.enc1_w, model.enc1_b);
}

std::vector<Parameter*> ModelBundle::parameters() {
  std::vector<Parameter*> out;
  for (auto& v : views)
    for (auto* p : v.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> ModelBundle::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& v : views)
    for (const auto* p : v.parameters()) out.push_back(p);
  return out;
}

void ModelBundle::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

ModelBundle make_bundle(const std::vector<std::size_t>& input_dims, std::size_t num_clusters,
                        std::size_t hidden_dim, std::size_t latent_dim, std::uint64_t seed) {
  ModelBundle bundle;
  for (std::size_t v = 0; v < input_dims.size(); ++v) {
    auto rng = make_rng({seed, 0x6e6574ULL, static_cast<std::uint64_t>(v)});
    NetworkShape shape{input_dims[v], hidden_dim, latent_dim, latent_dim, num_clusters};
    bundle.views.emplace_back(shape, rng, v);
  }
  return bundle;
}

namespace {

constexpr char kMagic[8] = {'A', 'I', 'R', 'M', 'V', 'C', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& file) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error(file.string() + ": truncated checkpoint");
  return value;
}

}  // namespace

void write_named_arrays(const NamedArrays& arrays, const std::filesystem::path& file) {
  std::filesystem::path temp = file;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + temp.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, arrays.size());
    for (const auto& [name, m] : arrays) {
      put<std::uint64_t>(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint64_t>(out, m.rows());
      put<std::uint64_t>(out, m.cols());
      out.write(reinterpret_cast<const char*>(m.values().data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing " + temp.string());
  }
  std::filesystem::rename(temp, file);
}

NamedArrays read_named_arrays(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(file.string() + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, file);
  if (version != kCheckpointVersion) {
    throw std::runtime_error(file.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, file);
  NamedArrays arrays;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint64_t>(in, file);
    if (len > (1u << 16)) throw std::runtime_error(file.string() + ": corrupt array name");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = get<std::uint64_t>(in, file);
    const auto cols = get<std::uint64_t>(in, file);
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw std::runtime_error(file.string() + ": truncated array '" + name + "'");
    arrays.emplace(std::move(name), Matrix::from_vector(rows, cols, std::move(data)));
  }
  return arrays;
}

NamedArrays bundle_arrays(const ModelBundle& bundle) {
  NamedArrays arrays;
  for (const auto* p : bundle.parameters()) arrays.emplace(p->name, p->value);
  return arrays;
}

void load_bundle_arrays(ModelBundle& bundle, const NamedArrays& arrays) {
  for (auto* p : bundle.parameters()) {
    auto it = arrays.find(p->name);
    if (it == arrays.end()) throw std::runtime_error("checkpoint missing '" + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw DimensionError("checkpoint array '" + p->name + "' has shape " +
                           it->second.shape_string() + ", expected " +
                           p->value.shape_string());
    }
    p->value = it->second;
  }
}

}  // namespace airmvc
