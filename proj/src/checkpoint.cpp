// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace dkws {

namespace {

constexpr const char* kMagic = "DKWS-CKPT-1";
constexpr const char* kCachedBiasName = "__cached_bias__";

struct NamedTensor {
  std::string name;
  Tensor* t;
};

// Full save/load inventory in a stable order.
std::vector<NamedTensor> Inventory(KwsModel& model, std::vector<Tensor>& flag_storage) {
  std::vector<NamedTensor> out;
  for (Param* p : model.params()) {
    out.push_back({p->name, &p->value});
    out.push_back({"adam.m." + p->name, &p->adam_m});
    out.push_back({"adam.v." + p->name, &p->adam_v});
  }
  flag_storage.clear();
  flag_storage.reserve(model.bn_states().size());
  for (auto& [key, st] : model.bn_states()) {
    out.push_back({key + ".running_mean", &st->running_mean});
    out.push_back({key + ".running_var", &st->running_var});
    flag_storage.push_back(Full({1}, st->initialized ? 1.0 : 0.0));
    out.push_back({key + ".bn_init", &flag_storage.back()});
  }
  return out;
}

void WriteDoublesLe(std::ostream& os, const std::vector<double>& v) {
  static_assert(sizeof(double) == 8);
  // Assumes a little-endian host, which this toolchain targets.
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void ReadDoublesLe(std::istream& is, std::vector<double>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint: truncated tensor payload");
}

struct Header {
  CheckpointMeta meta;
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
  };
  std::vector<Entry> entries;
};

Header ReadHeader(std::istream& is, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
  Header h;
  size_t expected = 0;
  while (std::getline(is, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "config_hash") {
      ls >> std::hex >> h.meta.config_hash >> std::dec;
    } else if (key == "iteration") {
      ls >> h.meta.iteration;
    } else if (key == "adam_steps") {
      ls >> h.meta.adam_steps;
    } else if (key == "sample_rate") {
      ls >> h.meta.sample_rate;
    } else if (key == "tensors") {
      ls >> expected;
    } else if (key == "tensor") {
      Header::Entry e;
      std::string dtype;
      size_t nd = 0;
      ls >> e.name >> dtype >> nd;
      if (dtype != "float64")
        throw std::runtime_error("checkpoint: unsupported dtype '" + dtype + "'");
      e.shape.resize(nd);
      for (size_t i = 0; i < nd; ++i) ls >> e.shape[i];
      if (!ls) throw std::runtime_error("checkpoint: malformed tensor line: " + line);
      h.entries.push_back(std::move(e));
    } else {
      throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (expected != h.entries.size())
    throw std::runtime_error("checkpoint: tensor count mismatch in header");
  return h;
}

}  // namespace

void SaveCheckpoint(const std::string& path, KwsModel& model, int64_t iteration,
                    const AdamOptimizer* opt) {
  std::vector<Tensor> flags;
  auto inv = Inventory(model, flags);
  Tensor cached;
  if (model.has_cached_bias()) {
    cached = model.cached_bias();
    inv.push_back({kCachedBiasName, &cached});
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os << kMagic << "\n";
  std::ostringstream hh;
  hh << std::hex << model.config().hash();
  os << "config_hash " << hh.str() << "\n";
  os << "iteration " << iteration << "\n";
  os << "adam_steps " << (opt ? opt->iterations() : 0) << "\n";
  os << "sample_rate " << model.config().sample_rate << "\n";
  os << "tensors " << inv.size() << "\n";
  for (const auto& e : inv) {
    os << "tensor " << e.name << " float64 " << e.t->ndim();
    for (int64_t d : e.t->shape) os << " " << d;
    os << "\n";
  }
  os << "data\n";
  for (const auto& e : inv) WriteDoublesLe(os, e.t->v);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointMeta LoadCheckpoint(const std::string& path, KwsModel& model, AdamOptimizer* opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  Header h = ReadHeader(is, path);
  if (h.meta.config_hash != model.config().hash())
    throw std::runtime_error("checkpoint: config hash mismatch (file was written for a "
                             "different model configuration)");

  std::vector<Tensor> flags;
  auto inv = Inventory(model, flags);
  std::map<std::string, Tensor*> by_name;
  for (auto& e : inv) by_name[e.name] = e.t;
  Tensor cached;

  for (const auto& e : h.entries) {
    Tensor* dst = nullptr;
    if (e.name == kCachedBiasName) {
      cached = Tensor(e.shape);
      dst = &cached;
    } else {
      auto it = by_name.find(e.name);
      if (it == by_name.end())
        throw std::runtime_error("checkpoint: tensor '" + e.name + "' not in this model");
      dst = it->second;
      if (dst->shape != e.shape)
        throw std::runtime_error("checkpoint: shape mismatch for '" + e.name + "'");
      by_name.erase(it);
    }
    ReadDoublesLe(is, dst->v);
  }
  if (!by_name.empty())
    throw std::runtime_error("checkpoint: file is missing tensor '" +
                             by_name.begin()->first + "'");

  // propagate the restored normalization flags back into the states
  size_t fi = 0;
  for (auto& [key, st] : model.bn_states()) {
    (void)key;
    st->initialized = flags[fi++].v[0] != 0.0;
  }
  if (cached.numel() > 0) model.set_cached_bias(std::move(cached));
  if (opt) opt->set_iterations(h.meta.adam_steps);
  return h.meta;
}

CheckpointMeta PeekCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  return ReadHeader(is, path).meta;
}

}  // namespace dkws
