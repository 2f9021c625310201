// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "deepperson/errors.hpp"

namespace deepperson {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    auto len = read_pod<std::uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError("checkpoint: truncated string");
    return s;
}

void write_kv(std::ostream& os, const KvList& kv) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(kv.size()));
    for (const auto& [k, v] : kv) {
        write_string(os, k);
        write_string(os, v);
    }
}

KvList read_kv(std::istream& is) {
    auto n = read_pod<std::uint32_t>(is);
    KvList kv;
    kv.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string k = read_string(is);
        std::string v = read_string(is);
        kv.emplace_back(std::move(k), std::move(v));
    }
    return kv;
}

void write_tensors(std::ostream& os, const NamedTensors& tensors) {
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_string(os, name);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) write_pod<std::int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
}

NamedTensors read_tensors(std::istream& is) {
    auto n = read_pod<std::uint64_t>(is);
    NamedTensors tensors;
    tensors.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = read_string(is);
        auto rank = read_pod<std::uint32_t>(is);
        if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
        std::vector<int> shape(rank);
        for (auto& d : shape) d = read_pod<std::int32_t>(is);
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw DataError("checkpoint: truncated tensor data");
        tensors.emplace_back(std::move(name), std::move(t));
    }
    return tensors;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_kv(os, ckpt.model_config);
    write_kv(os, ckpt.trainer_fingerprint);
    write_tensors(os, ckpt.params);
    write_tensors(os, ckpt.optimizer);
    write_pod<std::int32_t>(os, ckpt.state.epoch);
    write_pod<std::int32_t>(os, ckpt.state.batch_in_epoch);
    write_pod<std::int64_t>(os, ckpt.state.global_step);
    write_pod<double>(os, ckpt.state.best_map);
    write_pod<std::int32_t>(os, ckpt.state.best_epoch);
    write_string(os, ckpt.state.rng_state);
    if (!os) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file: " + path);
    auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.model_config = read_kv(is);
    ckpt.trainer_fingerprint = read_kv(is);
    ckpt.params = read_tensors(is);
    ckpt.optimizer = read_tensors(is);
    ckpt.state.epoch = read_pod<std::int32_t>(is);
    ckpt.state.batch_in_epoch = read_pod<std::int32_t>(is);
    ckpt.state.global_step = read_pod<std::int64_t>(is);
    ckpt.state.best_map = read_pod<double>(is);
    ckpt.state.best_epoch = read_pod<std::int32_t>(is);
    ckpt.state.rng_state = read_string(is);
    return ckpt;
}

NamedTensors snapshot_params(const ParamList& params) {
    NamedTensors out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.name, p.var.value());
    return out;
}

void apply_params(const NamedTensors& stored, ParamList& params) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : stored) by_name[name] = &t;
    for (auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end())
            throw DataError("checkpoint is missing parameter '" + p.name + "'");
        if (!it->second->same_shape(p.var.value()))
            throw DataError("checkpoint parameter '" + p.name + "' has shape " +
                            it->second->shape_str() + ", model expects " + p.var.value().shape_str());
        p.var.value() = *it->second;
    }
}

std::string diff_kv(const KvList& expected, const KvList& actual) {
    std::map<std::string, std::string> exp(expected.begin(), expected.end());
    std::map<std::string, std::string> act(actual.begin(), actual.end());
    std::ostringstream os;
    for (const auto& [k, v] : exp) {
        auto it = act.find(k);
        if (it == act.end())
            os << "  " << k << ": " << v << " -> (missing)\n";
        else if (it->second != v)
            os << "  " << k << ": " << v << " -> " << it->second << "\n";
    }
    for (const auto& [k, v] : act)
        if (!exp.count(k)) os << "  " << k << ": (missing) -> " << v << "\n";
    return os.str();
}

}  // namespace deepperson
