#include "sdrnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sdrnn {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

double get_f64(std::istream& in) {
  std::uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 5);
  put_u32(out, kCheckpointVersion);

  std::ostringstream meta;
  for (const auto& [k, v] : ck.metadata) meta << k << "=" << v << "\n";
  const std::string m = meta.str();
  put_u32(out, std::uint32_t(m.size()));
  out.write(m.data(), std::streamsize(m.size()));

  put_u32(out, std::uint32_t(ck.arrays.size()));
  for (const auto& a : ck.arrays) {
    put_u32(out, std::uint32_t(a.name.size()));
    out.write(a.name.data(), std::streamsize(a.name.size()));
    put_u32(out, std::uint32_t(a.dims.size()));
    std::size_t expect = 1;
    for (auto d : a.dims) {
      put_u64(out, d);
      expect *= d;
    }
    if (expect != a.data.size()) {
      throw std::runtime_error("checkpoint: array " + a.name +
                               " dims do not match data length");
    }
    for (double d : a.data) put_f64(out, d);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  }
  Checkpoint ck;
  const std::uint32_t mlen = get_u32(in);
  std::string meta(mlen, '\0');
  in.read(meta.data(), mlen);
  if (!in) throw std::runtime_error("checkpoint: truncated metadata");
  std::istringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  const std::uint32_t narr = get_u32(in);
  for (std::uint32_t i = 0; i < narr; ++i) {
    Checkpoint::Array a;
    const std::uint32_t nlen = get_u32(in);
    a.name.resize(nlen);
    in.read(a.name.data(), nlen);
    const std::uint32_t ndim = get_u32(in);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      a.dims.push_back(std::size_t(get_u64(in)));
      total *= a.dims.back();
    }
    a.data.resize(total);
    for (std::size_t j = 0; j < total; ++j) a.data[j] = get_f64(in);
    ck.arrays.push_back(std::move(a));
  }
  return ck;
}

static std::string meta_get(const Checkpoint& ck, const std::string& key) {
  auto it = ck.metadata.find(key);
  if (it == ck.metadata.end()) {
    throw std::runtime_error("checkpoint: missing metadata key '" + key + "'");
  }
  return it->second;
}

Checkpoint checkpoint_from_net(Net& net, const TrainConfig& cfg) {
  Checkpoint ck;
  const ModelDims& d = net.dims();
  ck.metadata["arch"] = arch_name(net.arch());
  ck.metadata["static_dim"] = std::to_string(d.static_dim);
  ck.metadata["dynamic_dim"] = std::to_string(d.dynamic_dim);
  ck.metadata["labels"] = std::to_string(d.labels);
  ck.metadata["rank"] = std::to_string(d.rank);
  ck.metadata["hidden"] = std::to_string(d.hidden);
  ck.metadata["tle_n"] = std::to_string(d.tle_n);
  ck.metadata["rng_algorithm"] = std::string(Rng::kAlgorithmId);
  ck.metadata["learning_rate"] = std::to_string(cfg.learning_rate);
  ck.metadata["dropout_rate"] = std::to_string(cfg.dropout_rate);
  ck.metadata["optimizer"] = optimizer_name(cfg.optimizer);
  ck.metadata["rmsprop_decay"] = std::to_string(cfg.rmsprop_decay);
  ck.metadata["epsilon"] = std::to_string(cfg.epsilon);
  ck.metadata["max_epochs"] = std::to_string(cfg.max_epochs);
  ck.metadata["patience"] = std::to_string(cfg.patience);
  ck.metadata["batch"] = std::to_string(cfg.batch);
  ck.metadata["seed"] = std::to_string(cfg.seed);
  for (auto& t : net.tensors()) {
    Checkpoint::Array a;
    a.name = t.name;
    a.dims = t.dims;
    a.data.assign(t.data, t.data + t.size);
    ck.arrays.push_back(std::move(a));
  }
  return ck;
}

TrainConfig train_config_from_checkpoint(const Checkpoint& ck) {
  TrainConfig cfg;
  cfg.rank = std::stoul(meta_get(ck, "rank"));
  cfg.hidden = std::stoul(meta_get(ck, "hidden"));
  cfg.tle_n = std::stoul(meta_get(ck, "tle_n"));
  cfg.learning_rate = std::stod(meta_get(ck, "learning_rate"));
  cfg.dropout_rate = std::stod(meta_get(ck, "dropout_rate"));
  cfg.optimizer = meta_get(ck, "optimizer") == "rmsprop" ? Optimizer::RmsProp
                                                         : Optimizer::Adagrad;
  cfg.rmsprop_decay = std::stod(meta_get(ck, "rmsprop_decay"));
  cfg.epsilon = std::stod(meta_get(ck, "epsilon"));
  cfg.max_epochs = std::stoul(meta_get(ck, "max_epochs"));
  cfg.patience = std::stoul(meta_get(ck, "patience"));
  cfg.batch = std::stoul(meta_get(ck, "batch"));
  cfg.seed = std::stoull(meta_get(ck, "seed"));
  return cfg;
}

std::unique_ptr<Net> net_from_checkpoint(const Checkpoint& ck) {
  ModelDims dims;
  dims.static_dim = std::stoul(meta_get(ck, "static_dim"));
  dims.dynamic_dim = std::stoul(meta_get(ck, "dynamic_dim"));
  dims.labels = std::stoul(meta_get(ck, "labels"));
  dims.rank = std::stoul(meta_get(ck, "rank"));
  dims.hidden = std::stoul(meta_get(ck, "hidden"));
  dims.tle_n = std::stoul(meta_get(ck, "tle_n"));
  auto arch = parse_arch(meta_get(ck, "arch"));
  if (!arch) throw std::runtime_error("checkpoint: unknown architecture");
  Rng dummy(0);
  std::uint64_t random_seed = 0;
  if (*arch == Arch::Random) {
    random_seed = std::stoull(meta_get(ck, "seed"));
  }
  auto net = make_net(*arch, dims, dummy, random_seed);
  auto refs = net->tensors();
  if (refs.size() != ck.arrays.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch (have " +
                             std::to_string(ck.arrays.size()) + ", expect " +
                             std::to_string(refs.size()) + ")");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& a = ck.arrays[i];
    auto& r = refs[i];
    if (a.name != r.name || a.dims != r.dims) {
      throw std::runtime_error("checkpoint: tensor mismatch at '" + a.name +
                               "' (expected '" + r.name + "')");
    }
    std::copy(a.data.begin(), a.data.end(), r.data);
  }
  return net;
}

}  // namespace sdrnn
