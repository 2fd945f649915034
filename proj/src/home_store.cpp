// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sortie/autonomy.hpp"

namespace sortie::autonomy {

std::uint32_t crc32(const void* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    crc = table[(crc ^ bytes[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

static constexpr const char* kHomeHeader = "sortie-home-v1";

void home_store_persist(const std::string& path, const HomeRecord& record) {
  char payload[160];
  std::snprintf(payload, sizeof(payload), "%.9g %.9g %.9g %.9g", record.horizontal.x(),
                record.horizontal.y(), record.takeoff_altitude, record.timestamp);
  const std::uint32_t crc = crc32(payload, std::strlen(payload));

  const std::string tmp = path + ".tmp";
  FILE* f = std::fopen(tmp.c_str(), "w");
  if (f == nullptr) {
    throw HomeStoreError("home_store_persist: cannot open " + tmp);
  }
  std::fprintf(f, "%s\n%s\ncrc %08x\n", kHomeHeader, payload, crc);
  std::fflush(f);
  ::fsync(::fileno(f));
  std::fclose(f);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw HomeStoreError("home_store_persist: rename failed for " + path);
  }
}

HomeRecord home_store_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw HomeStoreError("home_store_load: missing record at " + path);
  }
  std::string header, payload, crc_line;
  if (!std::getline(in, header) || !std::getline(in, payload) || !std::getline(in, crc_line)) {
    throw HomeStoreError("home_store_load: truncated record");
  }
  if (header != kHomeHeader) {
    throw HomeStoreError("home_store_load: unknown header");
  }
  unsigned stored = 0;
  if (std::sscanf(crc_line.c_str(), "crc %08x", &stored) != 1 ||
      stored != crc32(payload.data(), payload.size())) {
    throw HomeStoreError("home_store_load: checksum mismatch");
  }
  HomeRecord rec;
  std::istringstream ss(payload);
  if (!(ss >> rec.horizontal.x() >> rec.horizontal.y() >> rec.takeoff_altitude >>
        rec.timestamp)) {
    throw HomeStoreError("home_store_load: malformed payload");
  }
  return rec;
}

}  // namespace sortie::autonomy
