#include <slick/pcap.hh>

#include <cstring>
#include <iterator>

namespace slick::pcap {

namespace {

uint32_t rd32(const uint8_t *p, bool swap) {
    uint32_t v;
    std::memcpy(&v, p, 4);
    return swap ? __builtin_bswap32(v) : v;
}

void put32(std::ofstream &o, uint32_t v) { o.write(reinterpret_cast<const char *>(&v), 4); }
void put16(std::ofstream &o, uint16_t v) { o.write(reinterpret_cast<const char *>(&v), 2); }

} // namespace

std::vector<Record> read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PcapError("cannot open " + path.string());
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), {});
    if (buf.size() < 24)
        throw PcapError(path.string() + ": truncated file header");
    bool swap;
    uint32_t magic = rd32(buf.data(), false);
    if (magic == kMagic)
        swap = false;
    else if (magic == __builtin_bswap32(kMagic))
        swap = true;
    else
        throw PcapError(path.string() + ": not a classic pcap file");
    uint32_t linktype = rd32(&buf[20], swap);
    if (linktype != kLinktypeEthernet)
        throw PcapError(path.string() + ": unsupported linktype " + std::to_string(linktype));

    std::vector<Record> out;
    size_t off = 24;
    while (off < buf.size()) {
        if (buf.size() - off < 16)
            throw PcapError(path.string() + ": truncated record header");
        uint32_t sec = rd32(&buf[off], swap), usec = rd32(&buf[off + 4], swap);
        uint32_t incl = rd32(&buf[off + 8], swap), orig = rd32(&buf[off + 12], swap);
        off += 16;
        if (incl > buf.size() - off)
            throw PcapError(path.string() + ": truncated record");
        Record r;
        r.ts_ns = uint64_t(sec) * 1000000000ull + uint64_t(usec) * 1000ull;
        r.orig_len = orig;
        r.data.assign(buf.begin() + long(off), buf.begin() + long(off + incl));
        out.push_back(std::move(r));
        off += incl;
    }
    return out;
}

Writer::Writer(const std::filesystem::path &path, uint32_t snaplen)
    : _out(path, std::ios::binary | std::ios::trunc), _snaplen(snaplen) {
    if (!_out)
        throw PcapError("cannot create " + path.string());
    put32(_out, kMagic);
    put16(_out, 2);
    put16(_out, 4);
    put32(_out, 0);
    put32(_out, 0);
    put32(_out, snaplen);
    put32(_out, kLinktypeEthernet);
}

void Writer::write(std::span<const uint8_t> frame, uint64_t ts_ns) {
    uint32_t incl = frame.size() > _snaplen ? _snaplen : uint32_t(frame.size());
    put32(_out, uint32_t(ts_ns / 1000000000ull));
    put32(_out, uint32_t(ts_ns % 1000000000ull / 1000));
    put32(_out, incl);
    put32(_out, uint32_t(frame.size()));
    _out.write(reinterpret_cast<const char *>(frame.data()), incl);
    ++_records;
}

void Writer::close() {
    _out.close();
    if (_out.fail())
        throw PcapError("error writing capture file");
}

} // namespace slick::pcap
