#include "pcsm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pcsm/common.hpp"
#include "pcsm/tape.hpp"

namespace pcsm {

namespace {

constexpr std::size_t kH1 = 32;
constexpr std::size_t kH2 = 64;
constexpr std::size_t kF = 64;
constexpr std::size_t kHead = 64;

std::vector<Tensor*> tensor_list(ModelParams& m) {
  return {&m.w1, &m.b1, &m.w2, &m.b2,  &m.w3,
          &m.b3, &m.wg1, &m.bg1, &m.wg2, &m.bg2};
}

std::vector<const Tensor*> tensor_list(const ModelParams& m) {
  return {&m.w1, &m.b1, &m.w2, &m.b2,  &m.w3,
          &m.b3, &m.wg1, &m.bg1, &m.wg2, &m.bg2};
}

// Graph for one cloud: h layers per point, max pool, head, optional loss.
struct ModelGraph {
  Tape tape;
  Tape::NodeId input = 0;
  std::vector<Tape::NodeId> params;
  Tape::NodeId pool = 0;
  Tape::NodeId logits = 0;
  Tape::NodeId loss = 0;
  bool has_loss = false;
  Tensor input_tensor;

  ModelGraph(const ModelParams& m, const Cloud& cloud, int label, bool with_loss) {
    if (cloud.empty()) {
      throw StructuralError("model: empty cloud");
    }
    if (with_loss && (label < 0 || label >= m.class_count())) {
      throw StructuralError("model: label out of range");
    }
    input_tensor = cloud_to_tensor(cloud);
    input = tape.leaf({cloud.size(), 3}, LeafKind::input);
    auto leaves = tensor_list(m);
    params.reserve(leaves.size());
    for (const Tensor* t : leaves) {
      params.push_back(tape.leaf(t->shape(), LeafKind::parameter));
    }
    const auto h1 = tape.relu(tape.affine(input, params[0], params[1]));
    const auto h2 = tape.relu(tape.affine(h1, params[2], params[3]));
    const auto h3 = tape.relu(tape.affine(h2, params[4], params[5]));
    pool = tape.max_rows(h3);
    const auto g1 = tape.relu(tape.affine(pool, params[6], params[7]));
    logits = tape.affine(g1, params[8], params[9]);
    if (with_loss) {
      loss = tape.softmax_cross_entropy(logits, static_cast<std::size_t>(label));
      has_loss = true;
    }
    tape.bind(input, &input_tensor);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      tape.bind(params[i], leaves[i]);
    }
  }

  Prediction prediction() const {
    Prediction p;
    const Tensor& l = tape.value(logits);
    p.logits.assign(l.data(), l.data() + l.size());
    // Stable softmax; identical to the loss node's probabilities.
    double m = p.logits[0];
    for (double v : p.logits) m = std::max(m, v);
    double z = 0.0;
    for (double v : p.logits) z += std::exp(v - m);
    const double lse = m + std::log(z);
    p.probabilities.resize(p.logits.size());
    for (std::size_t j = 0; j < p.logits.size(); ++j) {
      p.probabilities[j] = std::exp(p.logits[j] - lse);
    }
    p.predicted_class = static_cast<int>(
        std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
    p.pool_argmax = tape.argmax(pool);
    return p;
  }
};

void he_fill(Tensor& w, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(w.rows()));
  for (double& v : w.values()) v = rng.normal(0.0, stddev);
}

}  // namespace

ModelParams ModelParams::init(int class_count, std::uint64_t seed) {
  if (class_count < 2) {
    throw StructuralError("model: class count must be at least 2");
  }
  ModelParams m;
  const std::size_t k = static_cast<std::size_t>(class_count);
  m.w1 = Tensor({3, kH1});
  m.b1 = Tensor({kH1});
  m.w2 = Tensor({kH1, kH2});
  m.b2 = Tensor({kH2});
  m.w3 = Tensor({kH2, kF});
  m.b3 = Tensor({kF});
  m.wg1 = Tensor({kF, kHead});
  m.bg1 = Tensor({kHead});
  m.wg2 = Tensor({kHead, k});
  m.bg2 = Tensor({k});
  Rng rng(Rng::mix(seed, 0x1e17));
  for (Tensor* w : {&m.w1, &m.w2, &m.w3, &m.wg1, &m.wg2}) he_fill(*w, rng);
  return m;
}

void ModelParams::validate() const {
  auto expect = [](bool ok, const char* what) {
    if (!ok) throw StructuralError(std::string("model: ") + what);
  };
  expect(w1.rank() == 2 && w1.rows() == 3, "w1 must be 3xH");
  expect(b1.rank() == 1 && b1.size() == w1.cols(), "b1/w1 mismatch");
  expect(w2.rank() == 2 && w2.rows() == w1.cols(), "w2/w1 mismatch");
  expect(b2.rank() == 1 && b2.size() == w2.cols(), "b2/w2 mismatch");
  expect(w3.rank() == 2 && w3.rows() == w2.cols(), "w3/w2 mismatch");
  expect(b3.rank() == 1 && b3.size() == w3.cols(), "b3/w3 mismatch");
  expect(wg1.rank() == 2 && wg1.rows() == w3.cols(), "wg1/pool mismatch");
  expect(bg1.rank() == 1 && bg1.size() == wg1.cols(), "bg1/wg1 mismatch");
  expect(wg2.rank() == 2 && wg2.rows() == wg1.cols(), "wg2/wg1 mismatch");
  expect(bg2.rank() == 1 && bg2.size() == wg2.cols(), "bg2/wg2 mismatch");
  expect(wg2.cols() >= 2, "fewer than two classes");
  for (const Tensor* t : tensor_list(*this)) {
    if (!t->all_finite()) throw StructuralError("model: non-finite weight");
  }
}

Prediction forward(const ModelParams& model, const Cloud& cloud) {
  ModelGraph g(model, cloud, 0, false);
  g.tape.evaluate();
  return g.prediction();
}

double loss(const ModelParams& model, const Cloud& cloud, int label) {
  ModelGraph g(model, cloud, label, true);
  g.tape.evaluate();
  return g.tape.value(g.loss)[0];
}

LossGradients loss_with_input_gradient(const ModelParams& model,
                                       const Cloud& cloud, int label) {
  ModelGraph g(model, cloud, label, true);
  g.tape.evaluate();
  g.tape.backward(g.loss);
  LossGradients out;
  out.loss_value = g.tape.value(g.loss)[0];
  out.prediction = g.prediction();
  const Tensor& grad = g.tape.gradient(g.input);
  out.input_gradient.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.input_gradient[i] = {grad.at(i, 0), grad.at(i, 1), grad.at(i, 2)};
  }
  return out;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  if (dataset.items.empty()) {
    throw StructuralError("train: empty dataset");
  }
  if (config.epochs < 1) throw StructuralError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw StructuralError("train: batch size must be >= 1");
  if (!(config.learning_rate > 0.0)) {
    throw StructuralError("train: learning rate must be positive");
  }
  const int k = dataset.class_count;
  for (const LabeledCloud& item : dataset.items) {
    if (item.label < 0 || item.label >= k) {
      throw StructuralError("train: label out of range for class count");
    }
    if (item.cloud.empty()) throw StructuralError("train: empty cloud in dataset");
  }

  TrainResult result;
  result.model = ModelParams::init(k, Rng::mix(config.seed, 1));
  auto weights = tensor_list(result.model);

  std::vector<Tensor> velocity;
  for (const Tensor* w : weights) velocity.emplace_back(w->shape());

  Rng shuffle_rng(Rng::mix(config.seed, 2));
  std::vector<std::size_t> order(dataset.items.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Tensor> grad_acc;
  for (const Tensor* w : weights) grad_acc.emplace_back(w->shape());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (Tensor& g : grad_acc) g.fill(0.0);
      for (std::size_t s = start; s < stop; ++s) {
        const LabeledCloud& item = dataset.items[order[s]];
        try {
          ModelGraph g(result.model, item.cloud, item.label, true);
          g.tape.evaluate();
          g.tape.backward(g.loss);
          epoch_loss += g.tape.value(g.loss)[0];
          for (std::size_t p = 0; p < weights.size(); ++p) {
            const Tensor& pg = g.tape.gradient(g.params[p]);
            for (std::size_t i = 0; i < pg.size(); ++i) {
              grad_acc[p][i] += inv_batch * pg[i];
            }
          }
        } catch (const NumericError& e) {
          throw NumericError("train: diverged at epoch " +
                             std::to_string(epoch + 1) + ": " + e.what());
        }
      }
      for (std::size_t p = 0; p < weights.size(); ++p) {
        Tensor& w = *weights[p];
        if (config.optimizer == Optimizer::momentum) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            velocity[p][i] = config.momentum * velocity[p][i] -
                             config.learning_rate * grad_acc[p][i];
            w[i] += velocity[p][i];
          }
        } else {
          for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] -= config.learning_rate * grad_acc[p][i];
          }
        }
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("train: loss diverged at epoch " +
                         std::to_string(epoch + 1));
    }
    result.epoch_mean_loss.push_back(epoch_loss);
  }
  result.final_train_accuracy = accuracy(result.model, dataset);
  return result;
}

double accuracy(const ModelParams& model, const Dataset& dataset) {
  if (dataset.items.empty()) {
    throw StructuralError("accuracy: empty dataset");
  }
  std::size_t correct = 0;
  for (const LabeledCloud& item : dataset.items) {
    if (forward(model, item.cloud).predicted_class == item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.items.size());
}

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

}  // namespace

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  model.validate();
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.class_count()));
  put_u32(out, static_cast<std::uint32_t>(model.feature_count()));
  auto tensors = tensor_list(model);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const Tensor* t : tensors) {
    for (double v : t->values()) put_f64(out, v);
  }
  atomic_write_file(path, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic string");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t k = r.u32();
  const std::uint32_t f = r.u32();
  const std::uint32_t count = r.u32();
  if (count != 10) throw FormatError("checkpoint: unexpected tensor count");

  std::vector<std::vector<std::size_t>> shapes(count);
  for (auto& shape : shapes) {
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 2) throw FormatError("checkpoint: bad tensor rank");
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = r.u32();
      if (d == 0) throw FormatError("checkpoint: zero extent");
      shape.push_back(d);
    }
  }

  ModelParams m;
  auto tensors = tensor_list(m);
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Tensor loaded(shapes[t]);
    for (double& v : loaded.values()) v = r.f64();
    *tensors[t] = std::move(loaded);
  }
  if (r.pos != buf.size()) {
    throw FormatError("checkpoint: trailing bytes");
  }
  try {
    m.validate();
  } catch (const StructuralError& e) {
    throw FormatError(std::string("checkpoint: inconsistent shapes: ") + e.what());
  }
  if (m.class_count() != static_cast<int>(k) ||
      m.feature_count() != static_cast<int>(f)) {
    throw FormatError("checkpoint: header does not match layer shapes");
  }
  return m;
}

}  // namespace pcsm
