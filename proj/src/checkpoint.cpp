#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "s3tta/segnet.hpp"
#include "s3tta/styletx.hpp"

namespace s3tta {

namespace {

// 8-byte magic carries the format version in its last character.
constexpr char kMagic[8] = {'S', '3', 'T', 'T', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kKindStyle = 1;
constexpr std::uint32_t kKindSeg = 2;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i32(std::ostream& out, std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::int32_t read_i32(std::istream& in) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_i32(out, static_cast<std::int32_t>(t.shape.size()));
    for (int d : t.shape) write_i32(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

void read_tensor_into(std::istream& in, Tensor& t, const std::string& path) {
    const int nd = read_i32(in);
    std::vector<int> shape(nd);
    for (auto& d : shape) d = read_i32(in);
    if (shape != t.shape) throw std::runtime_error("checkpoint " + path + ": tensor shape mismatch");
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint " + path + ": truncated tensor data");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path, std::uint32_t expect_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint " + path + ": unknown format or version tag");
    const std::uint32_t kind = read_u32(in);
    if (kind != expect_kind)
        throw std::runtime_error("checkpoint " + path + ": wrong network kind");
    return in;
}

}  // namespace

void save_style_checkpoint(const std::string& path, const StyleTransferF& st) {
    auto out = open_out(path);
    out.write(kMagic, 8);
    write_u32(out, kKindStyle);
    write_i32(out, st.encoder.in_ch);
    write_i32(out, static_cast<std::int32_t>(st.encoder.widths.size()));
    for (int w : st.encoder.widths) write_i32(out, w);
    for (const auto* p : st.encoder.params()) write_tensor(out, *p);
    for (const auto* p : st.decoder.params()) write_tensor(out, *p);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

StyleTransferF load_style_checkpoint(const std::string& path) {
    auto in = open_in(path, kKindStyle);
    const int in_ch = read_i32(in);
    const int n = read_i32(in);
    if (n < 1 || n > 16) throw std::runtime_error("checkpoint " + path + ": bad stage count");
    std::vector<int> widths(n);
    for (auto& w : widths) w = read_i32(in);
    StyleTransferF st = StyleTransferF::make(in_ch, widths, 0);
    for (auto* p : st.encoder.params()) read_tensor_into(in, *p, path);
    for (auto* p : st.decoder.params()) read_tensor_into(in, *p, path);
    return st;
}

void save_seg_checkpoint(const std::string& path, const UNetF& net) {
    auto out = open_out(path);
    out.write(kMagic, 8);
    write_u32(out, kKindSeg);
    write_i32(out, net.in_ch);
    write_i32(out, net.base);
    for (const auto* p : net.params()) write_tensor(out, *p);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

UNetF load_seg_checkpoint(const std::string& path) {
    auto in = open_in(path, kKindSeg);
    const int in_ch = read_i32(in);
    const int base = read_i32(in);
    UNetF net(in_ch, base);
    for (auto* p : net.params()) read_tensor_into(in, *p, path);
    return net;
}

}  // namespace s3tta
