#pragma once

// Checkpoint container: format version, named parameter blobs stored as
// tensor records, optimizer moments, step counter and a config snapshot.
// Save -> load -> save round-trips are byte-identical.

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "irvf/binio.hpp"
#include "irvf/params.hpp"
#include "irvf/tensor_io.hpp"

namespace irvf {

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::uint32_t step = 0;
    std::string config_text;
    std::vector<std::pair<std::string, TensorF>> params;
    // Adam first/second moments, aligned with params when present.
    std::vector<std::tuple<std::string, TensorF, TensorF>> moments;

    std::vector<std::uint8_t> encode() const {
        std::vector<std::uint8_t> out;
        out.push_back('I');
        out.push_back('R');
        out.push_back('V');
        out.push_back('C');
        binio::put_u32(out, version);
        binio::put_u32(out, step);
        binio::put_u64(out, config_text.size());
        out.insert(out.end(), config_text.begin(), config_text.end());
        binio::put_u32(out, static_cast<std::uint32_t>(params.size()));
        for (const auto& [name, tensor] : params) {
            binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
            out.insert(out.end(), name.begin(), name.end());
            encode_tensor_record(out, tensor);
        }
        binio::put_u32(out, static_cast<std::uint32_t>(moments.size()));
        for (const auto& [name, m, v] : moments) {
            binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
            out.insert(out.end(), name.begin(), name.end());
            encode_tensor_record(out, m);
            encode_tensor_record(out, v);
        }
        return out;
    }

    static Checkpoint decode(const std::vector<std::uint8_t>& bytes) {
        binio::Reader r(bytes.data(), bytes.size());
        if (r.bytes(4) != "IRVC") throw std::runtime_error("checkpoint: bad magic");
        Checkpoint ck;
        ck.version = r.u32();
        if (ck.version != kVersion) {
            throw std::runtime_error("checkpoint: unsupported format version " +
                                     std::to_string(ck.version));
        }
        ck.step = r.u32();
        ck.config_text = r.bytes(static_cast<std::size_t>(r.u64()));
        const std::uint32_t np = r.u32();
        ck.params.reserve(np);
        for (std::uint32_t i = 0; i < np; ++i) {
            std::string name = r.bytes(r.u32());
            ck.params.emplace_back(std::move(name), decode_tensor_record(r));
        }
        const std::uint32_t nm = r.u32();
        ck.moments.reserve(nm);
        for (std::uint32_t i = 0; i < nm; ++i) {
            std::string name = r.bytes(r.u32());
            TensorF m = decode_tensor_record(r);
            TensorF v = decode_tensor_record(r);
            ck.moments.emplace_back(std::move(name), std::move(m), std::move(v));
        }
        if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
        return ck;
    }

    void save(const std::string& path) const { write_bytes(path, encode()); }

    static Checkpoint load(const std::string& path) { return decode(read_bytes(path)); }

    template <typename T>
    void capture_params(const ParamStore<T>& ps) {
        params.clear();
        params.reserve(static_cast<std::size_t>(ps.count()));
        for (int i = 0; i < ps.count(); ++i) {
            params.emplace_back(ps.name(i), ps.tensor(i).template cast<float>());
        }
    }

    template <typename T>
    void restore_params(ParamStore<T>& ps) const {
        if (static_cast<int>(params.size()) != ps.count()) {
            throw std::runtime_error("checkpoint: parameter count " + std::to_string(params.size()) +
                                     " does not match model (" + std::to_string(ps.count()) +
                                     "); config mismatch?");
        }
        for (int i = 0; i < ps.count(); ++i) {
            const auto& [name, tensor] = params[static_cast<std::size_t>(i)];
            if (name != ps.name(i)) {
                throw std::runtime_error("checkpoint: parameter '" + name + "' does not match model '" +
                                         ps.name(i) + "'");
            }
            if (tensor.shape() != ps.tensor(i).shape()) {
                throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
            }
            ps.tensor(i) = tensor.template cast<T>();
        }
    }
};

}  // namespace irvf
