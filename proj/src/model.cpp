#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace kgen {

namespace {

constexpr double kInitLo = -0.08;
constexpr double kInitHi = 0.08;

void add_gru(ParamSet& set, const std::string& prefix, std::size_t input,
             std::size_t hidden, Rng& rng) {
  for (const char* gate : {"r", "z", "h"}) {
    set.add(prefix + ".W_" + gate, Tensor::uniform({hidden, input}, rng, kInitLo, kInitHi));
    set.add(prefix + ".U_" + gate, Tensor::uniform({hidden, hidden}, rng, kInitLo, kInitHi));
    set.add(prefix + ".b_" + gate, Tensor({hidden}, 0.0, true));
  }
}

GruWeights bind_gru(ParamSet& set, const std::string& prefix) {
  GruWeights w;
  w.W_r = set.at(prefix + ".W_r");
  w.U_r = set.at(prefix + ".U_r");
  w.b_r = set.at(prefix + ".b_r");
  w.W_z = set.at(prefix + ".W_z");
  w.U_z = set.at(prefix + ".U_z");
  w.b_z = set.at(prefix + ".b_z");
  w.W_h = set.at(prefix + ".W_h");
  w.U_h = set.at(prefix + ".U_h");
  w.b_h = set.at(prefix + ".b_h");
  return w;
}

}  // namespace

ParamSet ModelParams::create(const ModelDims& dims, Rng& rng) {
  if (dims.vocab == 0 || dims.relations == 0)
    throw ConfigError("model dims need vocab and relation counts");
  ParamSet set;
  set.add("embed.word", Tensor::uniform({dims.vocab, dims.word_dim}, rng, kInitLo, kInitHi));
  set.add("embed.relation",
          Tensor::uniform({dims.relations, dims.relation_dim}, rng, kInitLo, kInitHi));
  add_gru(set, "enc.fwd", dims.enc_input(), dims.hidden, rng);
  add_gru(set, "enc.bwd", dims.enc_input(), dims.hidden, rng);
  add_gru(set, "dec", dims.dec_input(), dims.dec_state(), rng);
  set.add("attn.W", Tensor::uniform({dims.dec_state(), dims.enc_state()}, rng, kInitLo, kInitHi));
  set.add("mem.W_key",
          Tensor::uniform({dims.enc_state(), dims.word_dim}, rng, kInitLo, kInitHi));
  set.add("mem.W_value",
          Tensor::uniform({dims.enc_state(), dims.word_dim}, rng, kInitLo, kInitHi));
  set.add("dec.W_init",
          Tensor::uniform({dims.dec_state(),
                           dims.enc_state() + dims.relation_dim + dims.enc_state()},
                          rng, kInitLo, kInitHi));
  set.add("out.W", Tensor::uniform({dims.vocab, dims.dec_state()}, rng, kInitLo, kInitHi));
  set.add("out.b", Tensor({dims.vocab}, 0.0, true));
  return set;
}

ModelParams ModelParams::bind(ParamSet& set, const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.word_emb = set.at("embed.word");
  p.relation_emb = set.at("embed.relation");
  p.enc_fwd = bind_gru(set, "enc.fwd");
  p.enc_bwd = bind_gru(set, "enc.bwd");
  p.dec = bind_gru(set, "dec");
  p.W_attn = set.at("attn.W");
  p.W_key = set.at("mem.W_key");
  p.W_value = set.at("mem.W_value");
  p.W_init = set.at("dec.W_init");
  p.W_out = set.at("out.W");
  p.b_out = set.at("out.b");
  return p;
}

std::size_t apply_embedding_file(ParamSet& params, const ModelDims& dims,
                                 const Vocabulary& vocab, const std::string& path) {
  const auto table = load_embedding_file(path);
  Tensor& emb = params.at("embed.word");
  std::size_t applied = 0;
  for (const auto& [token, vec] : table) {
    if (!vocab.contains(token)) continue;
    if (vec.size() != dims.word_dim)
      throw DataError("embedding for '" + token + "' has " +
                      std::to_string(vec.size()) + " dims, model needs " +
                      std::to_string(dims.word_dim));
    const int id = vocab.id_or_unk(token);
    std::copy(vec.begin(), vec.end(),
              emb.data() + static_cast<std::size_t>(id) * dims.word_dim);
    ++applied;
  }
  return applied;
}

Tensor gru_cell_step(const Tensor& x, const Tensor& h, const GruWeights& w) {
  using namespace ops;
  const Tensor r = sigmoid(add(add(matmul(w.W_r, x), matmul(w.U_r, h)), w.b_r));
  const Tensor z = sigmoid(add(add(matmul(w.W_z, x), matmul(w.U_z, h)), w.b_z));
  const Tensor hcand =
      tanh(add(add(matmul(w.W_h, x), matmul(w.U_h, mul(r, h))), w.b_h));
  const Tensor ones(h.shape(), 1.0);
  return add(mul(sub(ones, z), h), mul(z, hcand));
}

EncodeResult encode(const std::vector<int>& token_ids, const RelationId& relation,
                    const ModelParams& params, bool training, Rng* dropout_rng) {
  using namespace ops;
  if (token_ids.empty()) throw DataError("encode: empty event");
  const std::size_t m = token_ids.size();
  const ModelDims& dims = params.dims;

  const Tensor h_c =
      embedding_lookup(params.relation_emb, static_cast<std::size_t>(relation.index));

  std::vector<Tensor> inputs;
  inputs.reserve(m);
  for (int id : token_ids) {
    Tensor e = embedding_lookup(params.word_emb, static_cast<std::size_t>(id));
    if (training && dims.dropout > 0.0) {
      if (!dropout_rng) throw ConfigError("encode: training mode needs a dropout rng");
      e = mul(e, dropout_mask(e.shape(), dims.dropout, *dropout_rng));
    }
    inputs.push_back(concat({e, h_c}));
  }

  std::vector<Tensor> fwd(m), bwd(m);
  Tensor h = Tensor({dims.hidden}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    h = gru_cell_step(inputs[i], h, params.enc_fwd);
    fwd[i] = h;
  }
  h = Tensor({dims.hidden}, 0.0);
  for (std::size_t i = m; i > 0; --i) {
    h = gru_cell_step(inputs[i - 1], h, params.enc_bwd);
    bwd[i - 1] = h;
  }

  std::vector<Tensor> rows;
  rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rows.push_back(concat({fwd[i], bwd[i]}));

  EncodeResult result;
  result.states = stack(rows);
  result.summary = concat({fwd[m - 1], bwd[0]});
  result.relation = h_c;
  return result;
}

MemoryBank build_memory_bank(const std::vector<KnowledgeEntry>& entries,
                             const ModelParams& params, const Vocabulary& vocab) {
  using namespace ops;
  MemoryBank bank;
  bank.rows = entries.size();
  if (entries.empty()) return bank;

  std::vector<Tensor> key_rows, value_rows;
  key_rows.reserve(entries.size());
  value_rows.reserve(entries.size());
  for (const KnowledgeEntry& entry : entries) {
    std::vector<std::size_t> key_ids, value_ids;
    for (const std::string& t : entry.key_tokens)
      key_ids.push_back(static_cast<std::size_t>(vocab.id_or_unk(t)));
    for (const std::string& t : entry.value_tokens)
      value_ids.push_back(static_cast<std::size_t>(vocab.id_or_unk(t)));
    key_rows.push_back(matmul(params.W_key, embed_mean(params.word_emb, key_ids)));
    value_rows.push_back(
        matmul(params.W_value, embed_mean(params.word_emb, value_ids)));
  }
  bank.keys = stack(key_rows);
  bank.values = stack(value_rows);
  return bank;
}

Tensor read_memory(const Tensor& h_x, const MemoryBank& bank,
                   const ModelParams& params) {
  using namespace ops;
  if (bank.rows == 0) return Tensor({params.dims.enc_state()}, 0.0);
  const Tensor relevance = softmax(matmul(bank.keys, h_x));      // [M]
  return matmul(transpose(bank.values), relevance);              // [2h]
}

Tensor init_decoder(const Tensor& h_x, const Tensor& h_c, const Tensor& h_k,
                    const ModelParams& params) {
  using namespace ops;
  return tanh(matmul(params.W_init, concat({h_x, h_c, h_k})));
}

DecodeStep decode_step(const Tensor& s_prev, int y_prev_id, const Tensor& states,
                       const Tensor& h_c, const ModelParams& params) {
  using namespace ops;
  // e_i = s_prev^T W_attn H_i, as a single matvec against H.
  const Tensor scores = matmul(states, matmul(transpose(params.W_attn), s_prev));
  const Tensor attn = softmax(scores);
  const Tensor context = matmul(transpose(states), attn);

  const Tensor y_prev = embedding_lookup(
      params.word_emb, static_cast<std::size_t>(y_prev_id));
  std::vector<Tensor> parts = {context, y_prev, h_c};
  if (params.dims.feed_prev_state) parts.push_back(s_prev);
  const Tensor s_new = gru_cell_step(concat(parts), s_prev, params.dec);

  DecodeStep step;
  step.logits = add(matmul(params.W_out, s_new), params.b_out);
  step.probs = softmax(step.logits);
  step.state = s_new;
  step.attention = attn;
  return step;
}

Tensor sequence_loss(const EventExample& example, const ModelParams& params,
                     const MemoryBank& bank, const Vocabulary& vocab,
                     bool training, Rng* dropout_rng) {
  using namespace ops;
  if (example.target_tokens.empty())
    throw DataError("sequence_loss: empty target for event: " + example.event_raw);

  const std::vector<int> event_ids = vocab.encode(example.event_tokens);
  const EncodeResult enc =
      encode(event_ids, example.relation, params, training, dropout_rng);
  const Tensor h_k = read_memory(enc.summary, bank, params);
  Tensor state = init_decoder(enc.summary, enc.relation, h_k, params);

  std::vector<int> golds = vocab.encode(example.target_tokens);
  golds.push_back(kEos);

  int prev = kBos;
  Tensor total = Tensor::scalar(0.0);
  for (int gold : golds) {
    DecodeStep step = decode_step(state, prev, enc.states, enc.relation, params);
    total = add(total, cross_entropy(step.logits, static_cast<std::size_t>(gold)));
    state = step.state;
    prev = gold;  // teacher forcing
  }
  return scale(total, 1.0 / static_cast<double>(golds.size()));
}

// ---------------------------------------------------------------------------
// Beam search

namespace {

struct Beam {
  std::vector<int> ids;
  double log_prob = 0.0;
  Tensor state;
  int prev = kBos;
};

double normalized(double log_prob, std::size_t len) {
  return log_prob / static_cast<double>(std::max<std::size_t>(1, len));
}

}  // namespace

std::vector<Hypothesis> beam_search(const std::vector<int>& event_ids,
                                    const RelationId& relation,
                                    const ModelParams& params,
                                    const MemoryBank& bank, std::size_t beam_width,
                                    std::size_t max_len, std::size_t k) {
  if (beam_width < 1) throw ConfigError("beam_search: beam width must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

  const EncodeResult enc = encode(event_ids, relation, params, false, nullptr);
  const Tensor h_k = read_memory(enc.summary, bank, params);

  std::vector<Beam> live;
  Beam root;
  root.state = init_decoder(enc.summary, enc.relation, h_k, params);
  live.push_back(std::move(root));

  std::vector<Hypothesis> finished;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    struct Cand {
      std::size_t beam;
      int token;
      double log_prob;
    };
    std::vector<Cand> cands;
    std::vector<DecodeStep> steps(live.size());
    for (std::size_t b = 0; b < live.size(); ++b) {
      steps[b] = decode_step(live[b].state, live[b].prev, enc.states,
                             enc.relation, params);
      const Tensor& probs = steps[b].probs;
      for (std::size_t v = 0; v < probs.size(); ++v) {
        const double p = probs.data()[v];
        const double lp = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
        cands.push_back({b, static_cast<int>(v), live[b].log_prob + lp});
      }
    }
    const std::size_t keep = std::min(beam_width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.beam != b.beam) return a.beam < b.beam;
                        return a.token < b.token;
                      });

    std::vector<Beam> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const Cand& cand = cands[c];
      std::vector<int> ids = live[cand.beam].ids;
      ids.push_back(cand.token);
      if (cand.token == kEos) {
        finished.push_back({std::move(ids), cand.log_prob,
                            normalized(cand.log_prob, ids.size())});
      } else if (t + 1 == max_len) {
        finished.push_back({std::move(ids), cand.log_prob,
                            normalized(cand.log_prob, ids.size())});
      } else {
        Beam beam;
        beam.ids = std::move(ids);
        beam.log_prob = cand.log_prob;
        beam.state = steps[cand.beam].state;
        beam.prev = cand.token;
        next.push_back(std::move(beam));
      }
    }
    live = std::move(next);
  }

  // Dedup by token sequence, keeping the best-scoring copy.
  std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token_ids < b.token_ids;
  });
  std::vector<Hypothesis> unique;
  std::set<std::vector<int>> seen;
  for (Hypothesis& h : finished) {
    if (seen.insert(h.token_ids).second) unique.push_back(std::move(h));
    if (unique.size() >= k) break;
  }
  return unique;
}

std::string hypothesis_text(const Hypothesis& hyp, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (int id : hyp.token_ids) {
    if (id == kEos || id == kBos || id == kPad) continue;
    tokens.push_back(vocab.token(id));
  }
  return detokenize(tokens);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'K', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    write_u64(out, bits);
  }
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string read_str(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint: truncated string");
  return s;
}

std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::vector<double> v(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64(in);
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    v[i] = x;
  }
  return v;
}

void write_param_set(std::ostream& out, const ParamSet& set) {
  write_u64(out, set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    write_str(out, set.name(i));
    const Tensor& t = set.tensor(i);
    write_u64(out, t.rank());
    for (std::size_t d : t.shape()) write_u64(out, d);
    write_doubles(out, t.values());
  }
}

ParamSet read_param_set(std::istream& in) {
  ParamSet set;
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_str(in);
    const std::uint64_t rank = read_u64(in);
    Shape shape(rank);
    for (std::uint64_t d = 0; d < rank; ++d) shape[d] = read_u64(in);
    std::vector<double> values = read_doubles(in);
    set.add(name, Tensor(shape, std::move(values)));
  }
  return set;
}

}  // namespace

ParamSet& Checkpoint::params_for(const std::string& relation_name) {
  for (auto& [name, set] : params) {
    if (name == relation_name || name == "shared") return set;
  }
  throw DataError("checkpoint has no parameters for relation: " + relation_name);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_str(out, ckpt.mode);
  write_str(out, dataset_mode_name(ckpt.dataset_mode));

  write_u64(out, ckpt.dims.vocab);
  write_u64(out, ckpt.dims.relations);
  write_u64(out, ckpt.dims.word_dim);
  write_u64(out, ckpt.dims.relation_dim);
  write_u64(out, ckpt.dims.hidden);
  write_doubles(out, {ckpt.dims.dropout});
  write_u32(out, ckpt.dims.feed_prev_state ? 1 : 0);

  write_u64(out, ckpt.vocab.size());
  for (const std::string& t : ckpt.vocab.tokens()) write_str(out, t);

  write_u64(out, ckpt.relations.size());
  for (const std::string& r : ckpt.relations.names()) write_str(out, r);

  write_u64(out, ckpt.params.size());
  for (const auto& [name, set] : ckpt.params) {
    write_str(out, name);
    write_param_set(out, set);
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.mode = read_str(in);
  ckpt.dataset_mode = parse_dataset_mode(read_str(in));

  ckpt.dims.vocab = read_u64(in);
  ckpt.dims.relations = read_u64(in);
  ckpt.dims.word_dim = read_u64(in);
  ckpt.dims.relation_dim = read_u64(in);
  ckpt.dims.hidden = read_u64(in);
  ckpt.dims.dropout = read_doubles(in).at(0);
  ckpt.dims.feed_prev_state = read_u32(in) != 0;

  const std::uint64_t vocab_count = read_u64(in);
  Vocabulary vocab;
  for (std::uint64_t i = 0; i < vocab_count; ++i) {
    const std::string token = read_str(in);
    if (i < kNumReserved) {
      if (token != kReservedSurface[i])
        throw DataError("checkpoint vocabulary has unexpected reserved tokens");
    } else {
      vocab.add(token);
    }
  }
  ckpt.vocab = std::move(vocab);

  const std::uint64_t rel_count = read_u64(in);
  std::vector<std::string> names(rel_count);
  for (auto& n : names) n = read_str(in);
  if (ckpt.dataset_mode == DatasetMode::generic) {
    ckpt.relations = RelationSet::generic(names);
  } else {
    ckpt.relations = RelationSet::for_mode(ckpt.dataset_mode);
    if (ckpt.relations.names() != names)
      throw DataError("checkpoint relation set does not match its dataset mode");
  }

  const std::uint64_t set_count = read_u64(in);
  for (std::uint64_t i = 0; i < set_count; ++i) {
    std::string name = read_str(in);
    ckpt.params.emplace_back(std::move(name), read_param_set(in));
  }
  return ckpt;
}

}  // namespace kgen
