#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace forge {

// Reversible encoding for answer-bearing strings stored in served files.
class SecretCodec {
public:
  virtual ~SecretCodec() = default;
  virtual std::string name() const = 0;
  virtual std::string encode(std::string_view plaintext) const = 0;
  // Throws DecodeError on malformed input.
  virtual std::string decode(std::string_view encoded) const = 0;
};

// RFC 4648 Base64 with padding.
class Base64Codec final : public SecretCodec {
public:
  std::string name() const override { return "base64"; }
  std::string encode(std::string_view plaintext) const override;
  std::string decode(std::string_view encoded) const override;
};

const SecretCodec& default_codec();

std::string encode_secret(std::string_view plaintext);
std::string decode_secret(std::string_view encoded);

} // namespace forge
