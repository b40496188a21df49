#pragma once

#include <optional>
#include <string>
#include <vector>

#include "knowledge.hpp"
#include "tensor.hpp"
#include "text.hpp"

namespace kgen {

// Network dimensions. Defaults follow the reference configuration: encoder
// hidden size 100 per direction, dropout 0.2 on word embeddings, at most 30
// memory entries.
struct ModelDims {
  std::size_t vocab = 0;
  std::size_t relations = 0;
  std::size_t word_dim = 100;       // d_w
  std::size_t relation_dim = 100;   // d_c
  std::size_t hidden = 100;         // d_h per encoder direction
  double dropout = 0.2;
  bool feed_prev_state = false;  // also feed s_{t-1} as decoder GRU input

  std::size_t enc_state() const { return 2 * hidden; }   // [fwd; bwd]
  std::size_t dec_state() const { return 2 * hidden; }
  std::size_t enc_input() const { return word_dim + relation_dim; }
  std::size_t dec_input() const {
    return enc_state() + word_dim + relation_dim +
           (feed_prev_state ? dec_state() : 0);
  }
};

struct GruWeights {
  Tensor W_r, U_r, b_r;
  Tensor W_z, U_z, b_z;
  Tensor W_h, U_h, b_h;
};

// Typed view over the canonical ParamSet. Handles share storage with the set,
// so updating the set updates the view.
struct ModelParams {
  ModelDims dims;
  Tensor word_emb;       // [V, d_w]
  Tensor relation_emb;   // [|C|, d_c]
  GruWeights enc_fwd;
  GruWeights enc_bwd;
  GruWeights dec;
  Tensor W_attn;         // [2h, 2h]
  Tensor W_key;          // [2h, d_w]
  Tensor W_value;        // [2h, d_w]
  Tensor W_init;         // [2h, 2h + d_c + 2h]
  Tensor W_out;          // [V, 2h]
  Tensor b_out;          // [V]

  // Fresh parameters, uniform in [-0.08, 0.08].
  static ParamSet create(const ModelDims& dims, Rng& rng);
  static ModelParams bind(ParamSet& set, const ModelDims& dims);
};

// Overwrite word-embedding rows for vocabulary tokens present in the file.
// Returns the number of rows replaced. Vector length must equal word_dim.
std::size_t apply_embedding_file(ParamSet& params, const ModelDims& dims,
                                 const Vocabulary& vocab,
                                 const std::string& path);

// r = sigmoid(W_r x + U_r h + b_r)
// z = sigmoid(W_z x + U_z h + b_z)
// hcand = tanh(W_h x + U_h (r*h) + b_h)
// h' = (1-z)*h + z*hcand
Tensor gru_cell_step(const Tensor& x, const Tensor& h, const GruWeights& w);

struct EncodeResult {
  Tensor states;   // [m, 2h], row i = [fwd_i; bwd_i]
  Tensor summary;  // [2h] = [fwd_m; bwd_1]
  Tensor relation; // [d_c], the relation embedding h_c
};

// Bi-directional GRU over the event, each input [E[x_i]; R[c]]. Dropout is
// applied to word embeddings in training mode only.
EncodeResult encode(const std::vector<int>& token_ids, const RelationId& relation,
                    const ModelParams& params, bool training, Rng* dropout_rng);

struct MemoryBank {
  Tensor keys;    // [M, 2h]
  Tensor values;  // [M, 2h]
  std::size_t rows = 0;
};

// Rows are W_key/W_value projections of the mean word embedding of each
// entry's key/value tokens. Differentiable into the embeddings and
// projections when recorded on a tape.
MemoryBank build_memory_bank(const std::vector<KnowledgeEntry>& entries,
                             const ModelParams& params, const Vocabulary& vocab);

// alpha = softmax(K h_x); h_k = sum_i alpha_i V_i. Empty bank -> zero vector.
Tensor read_memory(const Tensor& h_x, const MemoryBank& bank,
                   const ModelParams& params);

// s_0 = tanh(W_init [h_x; h_c; h_k])
Tensor init_decoder(const Tensor& h_x, const Tensor& h_c, const Tensor& h_k,
                    const ModelParams& params);

struct DecodeStep {
  Tensor probs;   // [V], softmax over the vocabulary
  Tensor logits;  // [V]
  Tensor state;   // [2h]
  Tensor attention;  // [m], weights over encoder positions
};

// Multiplicative attention with the previous state, then one decoder GRU step
// on [c_t; E[y_prev]; h_c].
DecodeStep decode_step(const Tensor& s_prev, int y_prev_id, const Tensor& states,
                       const Tensor& h_c, const ModelParams& params);

// Teacher-forced mean cross-entropy over the target with BOS prepended and
// EOS appended. Out-of-vocabulary gold tokens map to UNK.
Tensor sequence_loss(const EventExample& example, const ModelParams& params,
                     const MemoryBank& bank, const Vocabulary& vocab,
                     bool training, Rng* dropout_rng);

struct Hypothesis {
  std::vector<int> token_ids;  // excludes BOS; includes EOS when produced
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length

  bool operator==(const Hypothesis& o) const { return token_ids == o.token_ids; }
};

// Standard beam search over decode_step; hypotheses deduplicated by token
// sequence and sorted by length-normalized score. Returns min(k, found).
std::vector<Hypothesis> beam_search(const std::vector<int>& event_ids,
                                    const RelationId& relation,
                                    const ModelParams& params,
                                    const MemoryBank& bank, std::size_t beam_width,
                                    std::size_t max_len, std::size_t k);

// Candidate surface text: ids -> tokens, EOS/BOS/PAD stripped.
std::string hypothesis_text(const Hypothesis& hyp, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Versioned binary container holding the run's dims, vocabulary, relations
// and one named ParamSet per trained model ("shared" for multi/maml, one per
// relation for single-task). Round-trips doubles bit-exactly.

struct Checkpoint {
  std::string mode;  // single | multi | maml
  ModelDims dims;
  DatasetMode dataset_mode = DatasetMode::generic;
  Vocabulary vocab;
  RelationSet relations;
  std::vector<std::pair<std::string, ParamSet>> params;  // name -> params

  ParamSet& params_for(const std::string& relation_name);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kgen
