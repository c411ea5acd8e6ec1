#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace hprm {

/// A POSIX shared-memory region mapped into this process.
class ShmArena {
 public:
  ShmArena() = default;
  ShmArena(ShmArena&& o) noexcept;
  ShmArena& operator=(ShmArena&& o) noexcept;
  ShmArena(const ShmArena&) = delete;
  ShmArena& operator=(const ShmArena&) = delete;
  ~ShmArena();

  /// Creates (replacing any stale region of the same name) and maps
  /// read-write. With `prefault`, every page is touched up front so later
  /// writes never fault. The owner unlinks the name on destruction.
  static ShmArena create(const std::string& name, std::size_t size, bool prefault);
  /// Maps an existing region. `populate` pre-builds the page tables.
  static ShmArena open(const std::string& name, std::size_t size, bool writable, bool populate = true);

  [[nodiscard]] std::byte* data() const noexcept { return base_; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] std::span<std::byte> bytes() const noexcept { return {base_, size_}; }

 private:
  void reset() noexcept;

  std::string name_;
  std::byte* base_ = nullptr;
  std::size_t size_ = 0;
  bool owner_ = false;
};

}  // namespace hprm
