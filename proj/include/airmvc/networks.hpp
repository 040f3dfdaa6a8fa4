#pragma once

#include "airmvc/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <vector>

namespace airmvc {

struct NetworkShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 256;
  std::size_t latent_dim = 64;
  std::size_t projection_dim = 64;
  std::size_t num_clusters = 0;
};

/// One view's encoder, decoder, projector and classifier head.
///
/// encoder: input -> hidden (ReLU) -> latent (linear)
/// decoder: latent -> hidden (ReLU) -> input (linear)
/// projector: latent -> projection, then l2 row normalization
/// classifier: latent -> clusters, then row softmax
class ViewModel {
 public:
  ViewModel() = default;
  ViewModel(const NetworkShape& shape, std::mt19937_64& rng, std::size_t view_index);

  const NetworkShape& shape() const { return shape_; }

  Parameter enc1_w, enc1_b, enc2_w, enc2_b;
  Parameter dec1_w, dec1_b, dec2_w, dec2_b;
  Parameter proj_w, proj_b;
  Parameter cls_w, cls_b;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  /// Encoder and decoder only.
  std::vector<Parameter*> autoencoder_parameters();

 private:
  NetworkShape shape_;
};

struct EncodeCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix latent;
};

struct DecodeCache {
  Matrix latent;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix output;
};

struct Projection {
  Matrix raw;
  RowNormalized normalized;

  const Matrix& unit() const { return normalized.unit; }
  std::size_t degenerate_rows() const { return normalized.degenerate_rows; }
};

struct Classification {
  Matrix logits;
  Matrix probs;
};

EncodeCache encode_cached(const ViewModel& model, const Matrix& x);
Matrix encode(const ViewModel& model, const Matrix& x);
DecodeCache decode_cached(const ViewModel& model, const Matrix& latent);
Matrix decode(const ViewModel& model, const Matrix& latent);
Projection project(const ViewModel& model, const Matrix& latent);
Classification classify(const ViewModel& model, const Matrix& latent);

/// All four heads evaluated on one batch.
struct ViewForward {
  EncodeCache encoder;
  DecodeCache decoder;
  Projection projection;
  Classification classification;

  const Matrix& latent() const { return encoder.latent; }
  const Matrix& recon() const { return decoder.output; }
  const Matrix& z() const { return projection.unit(); }
  const Matrix& probs() const { return classification.probs; }
};

ViewForward forward(const ViewModel& model, const Matrix& x);

/// Upstream gradients for each head; an empty matrix means no gradient.
struct HeadGradients {
  Matrix recon;
  Matrix z;
  Matrix probs;
};

/// Accumulates parameter gradients for all heads that receive an upstream gradient.
void backward(ViewModel& model, const ViewForward& fwd, const HeadGradients& grads);

/// One ViewModel per view, in view order.
struct ModelBundle {
  std::vector<ViewModel> views;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grad();
};

ModelBundle make_bundle(const std::vector<std::size_t>& input_dims, std::size_t num_clusters,
                        std::size_t hidden_dim, std::size_t latent_dim, std::uint64_t seed);

using NamedArrays = std::map<std::string, Matrix>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: magic "AIRMVCCK", u32 version, u64 count, then per array
/// u64 name length, name bytes, u64 rows, u64 cols, rows*cols little-endian f64.
void write_named_arrays(const NamedArrays& arrays, const std::filesystem::path& file);
NamedArrays read_named_arrays(const std::filesystem::path& file);

NamedArrays bundle_arrays(const ModelBundle& bundle);
/// Copies values from `arrays` into matching parameters; throws on missing or misshapen entries.
void load_bundle_arrays(ModelBundle& bundle, const NamedArrays& arrays);

}  // namespace airmvc
