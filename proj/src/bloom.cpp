#include "ddse/bloom.hpp"

#include <bit>
#include <cmath>

namespace ddse::bloom {

Sizing size_for(std::uint64_t n, double p) {
  if (n < 1) throw InvalidArgument("Bloom filter capacity must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("false-positive rate must lie in (0, 1)");
  const double ln2 = std::log(2.0);
  const double b = std::ceil(-static_cast<double>(n) * std::log(p) / (ln2 * ln2));
  const double h = std::ceil(b / static_cast<double>(n) * ln2);
  return {static_cast<std::uint64_t>(b), static_cast<unsigned>(std::max(1.0, h))};
}

BloomFilter::BloomFilter(std::uint64_t bits, unsigned hashes, const crypto::Key& seed)
    : bit_len_(bits), hashes_(hashes), seed_(seed) {
  if (hashes < 1 || hashes > 255 || bits < hashes)
    throw InvalidArgument("Bloom filter requires b >= h >= 1 and h <= 255");
  bits_.assign((bits + 7) / 8, 0);
}

std::vector<std::uint64_t> BloomFilter::positions(ByteView x) const {
  const auto d = crypto::hmac_sha256(seed_, x);
  std::uint64_t h1 = 0, h2 = 0;
  for (int i = 0; i < 8; ++i) {
    h1 = h1 << 8 | d[i];
    h2 = h2 << 8 | d[8 + i];
  }
  h1 %= bit_len_;
  h2 = (h2 | 1) % bit_len_;
  std::vector<std::uint64_t> out(hashes_);
  for (unsigned i = 0; i < hashes_; ++i)
    out[i] = static_cast<std::uint64_t>((static_cast<unsigned __int128>(i) * h2 + h1) % bit_len_);
  return out;
}

void BloomFilter::insert(ByteView x) {
  for (auto pos : positions(x)) set(pos);
}

bool BloomFilter::contains(ByteView x) const {
  for (auto pos : positions(x))
    if (!test(pos)) return false;
  return true;
}

std::uint64_t BloomFilter::popcount() const {
  std::uint64_t n = 0;
  for (auto byte : bits_) n += static_cast<unsigned>(std::popcount(byte));
  return n;
}

std::vector<std::uint64_t> BloomFilter::set_bits() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    auto byte = bits_[i];
    while (byte) {
      const int b = std::countr_zero(byte);
      out.push_back(i * 8 + static_cast<unsigned>(b));
      byte &= static_cast<std::uint8_t>(byte - 1);
    }
  }
  return out;
}

void BloomFilter::encode_to(ByteWriter& w) const {
  w.u64(bit_len_).u8(static_cast<std::uint8_t>(hashes_)).raw(seed_).raw(bits_);
}

Bytes BloomFilter::encode() const {
  ByteWriter w(25 + bits_.size());
  encode_to(w);
  return std::move(w).take();
}

BloomFilter BloomFilter::decode(ByteReader& r) {
  const auto bits = r.u64();
  const unsigned hashes = r.u8();
  crypto::Key seed;
  r.fixed(seed);
  if (bits == 0 || (bits + 7) / 8 > r.remaining()) throw DecodeError("Bloom filter bit array truncated");
  try {
    BloomFilter f(bits, hashes, seed);
    auto raw = r.raw(f.bits_.size());
    std::copy(raw.begin(), raw.end(), f.bits_.begin());
    if (bits % 8 != 0 && (f.bits_.back() >> (bits % 8)) != 0)
      throw DecodeError("Bloom filter padding bits set");
    return f;
  } catch (const InvalidArgument& e) {
    throw DecodeError(e.what());
  }
}

BloomFilter BloomFilter::decode(ByteView b) {
  ByteReader r(b);
  auto f = decode(r);
  r.expect_done();
  return f;
}

}  // namespace ddse::bloom
