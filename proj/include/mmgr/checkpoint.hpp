#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/image_io.hpp"
#include "mmgr/network.hpp"
#include "mmgr/optim.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

// Checkpoint format, version 1:
//   magic "MMGR" | u32 version | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 ndim | u32 dims... |
//               f32 little-endian data (product-of-dims values)
struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

inline void save_checkpoint(const std::filesystem::path& path,
                            const std::vector<TensorRecord>& records) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), {'M', 'M', 'G', 'R'});
    detail::put_u32le(buf, 1u);
    detail::put_u32le(buf, (std::uint32_t)records.size());
    for (const auto& r : records) {
        if (r.name.size() > 0xffff) throw ParameterError("checkpoint: tensor name too long");
        if (r.dims.size() > 0xff) throw ParameterError("checkpoint: too many dimensions");
        buf.push_back((unsigned char)(r.name.size() & 0xff));
        buf.push_back((unsigned char)((r.name.size() >> 8) & 0xff));
        buf.insert(buf.end(), r.name.begin(), r.name.end());
        buf.push_back((unsigned char)r.dims.size());
        std::size_t numel = 1;
        for (std::uint32_t d : r.dims) {
            detail::put_u32le(buf, d);
            numel *= d;
        }
        if (numel != r.data.size())
            throw ParameterError("checkpoint: record '" + r.name + "' dims do not match data");
        for (float v : r.data) detail::put_f32le(buf, v);
    }
    detail::write_file_bytes(path, buf);
}

inline std::vector<TensorRecord> load_checkpoint(const std::filesystem::path& path) {
    auto buf = detail::read_file_bytes(path);
    const std::string file = path.string();
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > buf.size())
            throw FormatError(file + ": truncated at offset " + std::to_string(pos));
    };
    need(4);
    if (std::memcmp(buf.data(), "MMGR", 4) != 0) throw FormatError(file + ": bad checkpoint magic");
    pos = 4;
    need(8);
    const std::uint32_t version = detail::get_u32le(buf.data() + pos);
    pos += 4;
    if (version != 1)
        throw FormatError(file + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = detail::get_u32le(buf.data() + pos);
    pos += 4;

    std::vector<TensorRecord> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord r;
        need(2);
        const std::size_t name_len = buf[pos] | ((std::size_t)buf[pos + 1] << 8);
        pos += 2;
        need(name_len);
        r.name.assign(buf.begin() + (long)pos, buf.begin() + (long)(pos + name_len));
        pos += name_len;
        need(1);
        const std::size_t ndim = buf[pos++];
        std::size_t numel = 1;
        r.dims.resize(ndim);
        for (std::size_t d = 0; d < ndim; ++d) {
            need(4);
            r.dims[d] = detail::get_u32le(buf.data() + pos);
            pos += 4;
            numel *= r.dims[d];
        }
        need(4 * numel);
        r.data.resize(numel);
        for (std::size_t k = 0; k < numel; ++k) {
            r.data[k] = detail::get_f32le(buf.data() + pos);
            pos += 4;
        }
        records.push_back(std::move(r));
    }
    return records;
}

// --- network/optimizer adapters ------------------------------------------------

template <typename T>
TensorRecord to_record(const std::string& name, const Tensor<T>& t) {
    TensorRecord r;
    r.name = name;
    for (std::size_t d : t.shape()) r.dims.push_back((std::uint32_t)d);
    r.data.reserve(t.size());
    for (const auto& v : t) r.data.push_back((float)v);
    return r;
}

template <typename T>
void from_record(const TensorRecord& r, Tensor<T>& t) {
    Shape s;
    for (std::uint32_t d : r.dims) s.push_back(d);
    if (s != t.shape())
        throw FormatError("checkpoint: tensor '" + r.name + "' has shape mismatch");
    for (std::size_t i = 0; i < r.data.size(); ++i) t[i] = (T)r.data[i];
}

// Parameters, running statistics and (optionally) optimizer velocities plus
// the iteration counter, as one record list.
template <typename T>
std::vector<TensorRecord> network_records(Network<T>& net, SgdOptimizer<T>* opt = nullptr) {
    std::vector<TensorRecord> out;
    for (const auto& p : net.params()) out.push_back(to_record(p.name, *p.value));
    for (const auto& b : net.buffers()) out.push_back(to_record(b.name, *b.value));
    if (opt) {
        for (auto& [name, vel] : opt->velocity_refs()) out.push_back(to_record(name, *vel));
        TensorRecord iter;
        iter.name = "opt.iteration";
        iter.dims = {1};
        iter.data = {(float)opt->iteration()};
        out.push_back(std::move(iter));
    }
    return out;
}

template <typename T>
void apply_records(const std::vector<TensorRecord>& records, Network<T>& net,
                   SgdOptimizer<T>* opt = nullptr) {
    std::map<std::string, const TensorRecord*> by_name;
    for (const auto& r : records) by_name[r.name] = &r;
    auto fetch = [&](const std::string& name) -> const TensorRecord& {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw FormatError("checkpoint: missing tensor '" + name + "'");
        return *it->second;
    };
    for (auto& p : net.params()) from_record(fetch(p.name), *p.value);
    for (auto& b : net.buffers()) from_record(fetch(b.name), *b.value);
    if (opt) {
        for (auto& [name, vel] : opt->velocity_refs()) from_record(fetch(name), *vel);
        opt->set_iteration((long)fetch("opt.iteration").data.at(0));
    }
}

template <typename T>
void save_network_checkpoint(const std::filesystem::path& path, Network<T>& net,
                             SgdOptimizer<T>* opt = nullptr) {
    save_checkpoint(path, network_records(net, opt));
}

template <typename T>
void load_network_checkpoint(const std::filesystem::path& path, Network<T>& net,
                             SgdOptimizer<T>* opt = nullptr) {
    apply_records(load_checkpoint(path), net, opt);
}

} // namespace mmgr
