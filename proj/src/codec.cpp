#include "forge/codec.hpp"

#include "forge/errors.hpp"

#include <openssl/evp.h>

#include <vector>

namespace forge {

namespace {

bool is_b64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
         c == '/';
}

} // namespace

std::string Base64Codec::encode(std::string_view plaintext) const {
  if (plaintext.empty()) return {};
  std::vector<unsigned char> out(4 * ((plaintext.size() + 2) / 3) + 1);
  const int n = EVP_EncodeBlock(out.data(), reinterpret_cast<const unsigned char*>(plaintext.data()),
                                static_cast<int>(plaintext.size()));
  return std::string(reinterpret_cast<char*>(out.data()), static_cast<std::size_t>(n));
}

std::string Base64Codec::decode(std::string_view encoded) const {
  if (encoded.empty()) return {};
  if (encoded.size() % 4 != 0) {
    throw DecodeError("base64 length is not a multiple of 4");
  }
  std::size_t pad = 0;
  if (encoded.back() == '=') ++pad;
  if (encoded.size() >= 2 && encoded[encoded.size() - 2] == '=') ++pad;
  for (std::size_t i = 0; i < encoded.size() - pad; ++i) {
    if (!is_b64_char(encoded[i])) {
      throw DecodeError("invalid base64 character at offset " + std::to_string(i));
    }
  }
  std::vector<unsigned char> out(encoded.size() / 4 * 3 + 1);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(encoded.data()),
                                static_cast<int>(encoded.size()));
  if (n < 0) throw DecodeError("malformed base64");
  return std::string(reinterpret_cast<char*>(out.data()), static_cast<std::size_t>(n) - pad);
}

const SecretCodec& default_codec() {
  static const Base64Codec codec;
  return codec;
}

std::string encode_secret(std::string_view plaintext) { return default_codec().encode(plaintext); }

std::string decode_secret(std::string_view encoded) { return default_codec().decode(encoded); }

} // namespace forge
