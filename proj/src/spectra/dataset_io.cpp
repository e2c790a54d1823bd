/*
 * Copyright 2026 The msdg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// MSPC dataset container:
//   "MSPC" | version u32 | n u64 | l u64 | l x f32 m/z | n x (class u8, l x f32)
// All multi-byte fields little-endian.

#include "common/binary_io.hpp"
#include "spectra/spectra.hpp"

namespace msdg {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
    ds.validate();
    ByteWriter w;
    w.raw("MSPC");
    w.u32(kDatasetVersion);
    w.u64(ds.spectra.size());
    w.u64(ds.axis.size());
    for (float v : ds.axis.values) w.f32(v);
    for (const auto& s : ds.spectra) {
        w.u8(s.label);
        for (float v : s.intensities) w.f32(v);
    }
    return w.bytes();
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.raw(4) != "MSPC") throw FormatError("bad dataset magic (expected MSPC) at offset 0");
    const auto version_at = r.offset();
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw FormatError("unsupported dataset version " + std::to_string(version) + " at offset " +
                          std::to_string(version_at));
    }
    const std::uint64_t n = r.u64();
    const std::uint64_t l = r.u64();
    // Check the declared sizes against the payload before allocating.
    const std::uint64_t record = 1 + 4 * l;
    if (l > r.remaining() / 4 || (n > 0 && record > 0 && n > (r.remaining() - 4 * l) / record)) {
        r.fail("truncated dataset: header declares " + std::to_string(n) + " spectra of length " + std::to_string(l));
    }
    Dataset ds;
    ds.axis.values.resize(l);
    for (auto& v : ds.axis.values) v = r.f32();
    ds.spectra.resize(n);
    for (auto& s : ds.spectra) {
        const auto label_at = r.offset();
        s.label = r.u8();
        if (s.label < 1 || s.label > kNumClasses) {
            throw FormatError("class id " + std::to_string(s.label) + " outside 1..5 at offset " +
                              std::to_string(label_at));
        }
        s.intensities.resize(l);
        for (auto& v : s.intensities) v = r.f32();
    }
    if (r.remaining() != 0) r.fail("trailing bytes after dataset payload");
    return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) { write_file_bytes(path, encode_dataset(ds)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace msdg
