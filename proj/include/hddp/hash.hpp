#pragma once

// Git-style content hashes (SHA-1 of "blob <size>\0" + content).

#include <openssl/sha.h>

#include <fstream>
#include <sstream>
#include <string>

#include "hddp/errors.hpp"

namespace hddp
{

inline std::string sha1_hex(const std::string& bytes)
{
    unsigned char md[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
    static const char* digits = "0123456789abcdef";
    std::string out(2 * SHA_DIGEST_LENGTH, '0');
    for (int i = 0; i < SHA_DIGEST_LENGTH; ++i)
    {
        out[2 * i] = digits[md[i] >> 4];
        out[2 * i + 1] = digits[md[i] & 15];
    }
    return out;
}

/// Same value as `git hash-object` on the content.
inline std::string git_blob_hash(const std::string& content)
{
    std::string blob = "blob " + std::to_string(content.size());
    blob.push_back('\0');
    blob += content;
    return sha1_hex(blob);
}

inline std::string file_blob_hash(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return git_blob_hash(ss.str());
}

}  // namespace hddp
