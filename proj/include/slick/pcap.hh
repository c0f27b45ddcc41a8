#ifndef SLICK_PCAP_HH
#define SLICK_PCAP_HH

// Classic libpcap capture files (magic 0xa1b2c3d4, microsecond timestamps,
// either byte order on read; native little-endian on write).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include <slick/error.hh>

namespace slick::pcap {

constexpr uint32_t kMagic = 0xa1b2c3d4;
constexpr uint32_t kLinktypeEthernet = 1;

class PcapError : public Error {
  public:
    using Error::Error;
};

struct Record {
    uint64_t ts_ns = 0;
    uint32_t orig_len = 0;
    std::vector<uint8_t> data;
};

std::vector<Record> read_file(const std::filesystem::path &path);

class Writer {
  public:
    explicit Writer(const std::filesystem::path &path, uint32_t snaplen = 65535);
    void write(std::span<const uint8_t> frame, uint64_t ts_ns = 0);
    void close();
    uint64_t records() const { return _records; }

  private:
    std::ofstream _out;
    uint32_t _snaplen;
    uint64_t _records = 0;
};

} // namespace slick::pcap

#endif
