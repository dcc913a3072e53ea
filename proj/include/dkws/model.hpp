// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_MODEL_HPP_
#define DKWS_MODEL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "dkws/dsp.hpp"
#include "dkws/nn.hpp"
#include "dkws/simulate.hpp"

namespace dkws {

enum class ProjectionMode { kPlain, kBiasConcat, kContextLinear };
enum class BiasMode { kFixed, kVaried, kSpeakerDependent, kLearnable };

std::string to_string(ProjectionMode m);
std::string to_string(BiasMode m);
ProjectionMode projection_from_string(const std::string& s);
BiasMode bias_mode_from_string(const std::string& s);

struct ModelConfig {
  int sample_rate = 16000;
  SpectroConfig spectro;  // fft 512 -> 256 usable bins after the DC drop

  // encoder/decoder; entries are TOTAL real feature maps (complex pairs = half)
  std::vector<int> encoder_channels = {16, 32, 64, 128, 256, 256};
  int conv_kernel_f = 5;
  int conv_kernel_t = 2;  // current + one previous frame
  int lstm_hidden = 128;  // per complex part
  int lstm_layers = 2;
  int lstm_proj = 128;    // per part

  // KWS head
  int kws_dim = 128;
  int dtc_blocks = 16;
  int dtc_kernel = 5;
  std::vector<int> dilation_cycle = {1, 2, 4, 8};
  int context_frames = 3;  // current + two previous

  // audio context bias
  int bias_dim = 192;
  int mel_bins = 64;
  int bias_channels = 128;
  int bias_blocks = 3;
  int bias_att_dim = 64;

  ProjectionMode projection = ProjectionMode::kPlain;
  BiasMode bias_mode = BiasMode::kFixed;
  bool feature_merge = false;
  bool kws_only = false;  // standalone detector on log-mel, no enhancement net

  int num_layers() const { return static_cast<int>(encoder_channels.size()); }
  int freq_bins() const { return spectro.fft_size / 2; }
  int final_pairs() const { return encoder_channels.back() / 2; }
  int final_freq() const { return freq_bins() >> num_layers(); }
  int part_dim() const { return final_pairs() * final_freq(); }  // 512 at paper scale
  int flat_dim() const { return 2 * part_dim(); }                // 1024
  int dilation(int block) const {
    return dilation_cycle[static_cast<size_t>(block) % dilation_cycle.size()];
  }

  void validate() const;
  std::string canonical() const;  // stable text form, hashed into checkpoints
  uint64_t hash() const;
};

// One dilated temporal convolution block: causal depthwise conv, two pointwise
// convolutions, residual. Operates in [C, T] layout.
struct DtcBlock {
  DepthwiseConv1d dw;
  BatchNorm bn;
  Param pw1_W, pw1_b;  // [C, C], [C]
  Param pw2_W, pw2_b;
  void init(const std::string& name, int64_t c, int kernel, int dil, Rng& rng);
  V apply(Tape& t, V x, bool training);
  void collect(ParamList& ps);
};

// Reduced ECAPA-style keyword audio embedding extractor.
struct BiasEncoder {
  std::vector<Conv1d> convs;
  std::vector<BatchNorm> bns;
  std::vector<SeBlock> ses;
  AttentiveStatsPool pool;
  Linear out;
  int mel_bins = 64;
  void init(const ModelConfig& cfg, Rng& rng);
  V embed(Tape& t, V mel, bool training);  // [mel,T] -> [1, bias_dim]
  void collect(ParamList& ps);
};

struct ForwardResult {
  std::vector<CVar> enc_stack;  // per encoder layer, [pairs, F, T]
  CVar merged;                  // per-part [T, part_dim]
  V kws_in = -1;                // [T, kws_dim]
  V posteriors = -1;            // [T]
  CVar mask;                    // training only
  V enhanced = -1;              // waveform node, training only
};

class KwsModel {
 public:
  KwsModel(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamList params();  // stable order, matches checkpoint layout
  int64_t param_count();
  // Normalization running statistics, keyed by the layer's gamma name.
  std::vector<std::pair<std::string, ag::BnState*>> bn_states();

  // Encoder input from a spectrogram: bins 1..F (DC dropped, Nyquist kept).
  static std::pair<Tensor, Tensor> EncoderInput(const ComplexSpectrogram& spec);

  std::vector<CVar> encode(Tape& t, V spec_re, V spec_im, bool training);
  CVar feature_merge(Tape& t, const std::vector<CVar>& stack);
  // bias: [1, bias_dim] node, or -1 when the projection mode takes none
  V project(Tape& t, CVar merged, V bias);      // -> [T, kws_dim]
  V classify(Tape& t, V kws_in, bool training); // -> per-frame posterior [T]
  CVar enhance_mask(Tape& t, const std::vector<CVar>& stack, bool training);

  // Full forward. `bias` as above. Decoder runs only when training=true.
  ForwardResult forward(Tape& t, const ComplexSpectrogram& noisy, V bias, bool training,
                        const StftPlan* plan = nullptr);

  // Standalone detector variant (kws_only): log-mel in, posterior out.
  V forward_kws_only(Tape& t, const Tensor& logmel, bool training);

  V extract_embedding(Tape& t, const AudioBuffer& audio, bool training);
  // Mean embedding over a clip list (no tape, eval statistics); cached.
  Tensor compute_bias_embedding(const std::vector<AudioBuffer>& clips);
  void set_cached_bias(Tensor e);
  const Tensor& cached_bias() const { return cached_bias_; }
  bool has_cached_bias() const { return has_cached_bias_; }
  // Resolve the bias input node for one forward pass.
  V resolve_bias(Tape& t, const std::vector<AudioBuffer>& clips, bool training);

  // per-layer weights used by the merge (identity when feature_merge is off)
  std::vector<double> merge_weights() const;

  Param& learnable_bias() { return learnable_bias_; }
  Param& merge_param() { return merge_w_; }

  // downsample + flatten of one encoder layer, per part: [T, part_dim]
  CVar downsample_layer(Tape& t, const CVar& layer, int index);

  std::vector<ComplexConv2d>& encoder_layers() { return enc_; }
  std::vector<ComplexDeconv2d>& decoder_layers() { return dec_; }
  BiasEncoder& bias_encoder() { return bias_enc_; }

  int64_t projection_weight_count();  // weights (no biases) of the active projection

 private:
  ModelConfig cfg_;
  std::vector<ComplexConv2d> enc_;
  ComplexLstm lstm_;
  ComplexLinear lstm_proj_;
  ComplexLinear dec_expand_;
  std::vector<ComplexDeconv2d> dec_;
  Param merge_w_;
  Linear proj_plain_;               // 1024 -> 128
  Linear proj_bias_;                // 1216 -> 128
  std::vector<Linear> ccl_real_;    // per context offset, 608 -> 64
  std::vector<Linear> ccl_imag_;
  std::vector<DtcBlock> dtc_;
  Linear classifier_;               // kws_dim -> 2
  BiasEncoder bias_enc_;
  Param learnable_bias_;
  Linear mel_proj_;                 // kws_only frontend, mel -> kws_dim
  Tensor cached_bias_;
  bool has_cached_bias_ = false;

  friend class StreamingRunner;
};

// Eq-style per-frame magnitude sum of a complex feature map [C, F, T].
std::vector<double> FrameEnergy(const Tensor& re, const Tensor& im);

}  // namespace dkws

#endif  // DKWS_MODEL_HPP_
