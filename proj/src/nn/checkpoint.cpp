#include "amc/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "amc/errors.hpp"

namespace amc::nn {

namespace {

template <typename U>
void put(std::string& buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Cursor {
public:
    explicit Cursor(const std::vector<unsigned char>& b) : bytes_(b) {}

    template <typename U>
    U get(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::string str(std::size_t n) {
        need(n, "entry name");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void need(std::size_t n, const char* what) const {
        if (pos_ + n > bytes_.size()) throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
    }

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& entries, const std::filesystem::path& path) {
    if (entries.size() > 0xffff) throw InvalidArgument("checkpoint: too many entries");
    std::string buf = "HIQW";
    put<std::uint16_t>(buf, kCheckpointVersion);
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) throw InvalidArgument("checkpoint: entry name too long");
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(e.name.size()));
        buf += e.name;
        put<std::uint8_t>(buf, static_cast<std::uint8_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
        for (float v : e.tensor.values()) put<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(v));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "HIQW", 4) != 0)
        throw ParseError("bad checkpoint magic, expected HIQW", 0);
    Cursor c(bytes);
    c.str(4);
    const auto version = c.get<std::uint16_t>("version");
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
    const auto count = c.get<std::uint16_t>("entry count");
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        NamedTensor e;
        e.name = c.str(c.get<std::uint16_t>("name length"));
        const auto rank = c.get<std::uint8_t>("rank");
        if (rank == 0) throw ParseError("checkpoint entry '" + e.name + "' has rank 0", c.pos() - 1);
        Shape shape(rank);
        for (auto& d : shape) {
            d = c.get<std::uint32_t>("dimension");
            if (d == 0) throw ParseError("checkpoint entry '" + e.name + "' has a zero dimension", c.pos() - 4);
        }
        std::vector<float> values(shape_size(shape));
        c.need(values.size() * 4, "values");
        for (auto& v : values) v = std::bit_cast<float>(c.get<std::uint32_t>("values"));
        e.tensor = Tensor<float>(std::move(shape), std::move(values));
        out.push_back(std::move(e));
    }
    if (!c.done()) throw ParseError("trailing bytes after last checkpoint entry", c.pos());
    return out;
}

}  // namespace amc::nn
