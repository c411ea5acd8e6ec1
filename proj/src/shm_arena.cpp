#include "hprm/shm_arena.hpp"

#include "hprm/error.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>
#include <utility>

namespace hprm {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(Errc::io, what + ": " + std::strerror(errno)); }

}  // namespace

ShmArena::ShmArena(ShmArena&& o) noexcept
    : name_(std::move(o.name_)),
      base_(std::exchange(o.base_, nullptr)),
      size_(std::exchange(o.size_, 0)),
      owner_(std::exchange(o.owner_, false)) {}

ShmArena& ShmArena::operator=(ShmArena&& o) noexcept {
  if (this != &o) {
    reset();
    name_ = std::move(o.name_);
    base_ = std::exchange(o.base_, nullptr);
    size_ = std::exchange(o.size_, 0);
    owner_ = std::exchange(o.owner_, false);
  }
  return *this;
}

ShmArena::~ShmArena() { reset(); }

void ShmArena::reset() noexcept {
  if (base_ != nullptr) ::munmap(base_, size_);
  if (owner_) ::shm_unlink(name_.c_str());
  base_ = nullptr;
  size_ = 0;
  owner_ = false;
}

ShmArena ShmArena::create(const std::string& name, std::size_t size, bool prefault) {
  ::shm_unlink(name.c_str());
  int fd = ::shm_open(name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0) fail("shm_open " + name);
  if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
    ::close(fd);
    ::shm_unlink(name.c_str());
    fail("ftruncate " + name);
  }
  void* p = ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) {
    ::shm_unlink(name.c_str());
    fail("mmap " + name);
  }
  ShmArena a;
  a.name_ = name;
  a.base_ = static_cast<std::byte*>(p);
  a.size_ = size;
  a.owner_ = true;
  if (prefault) {
    const long page = ::sysconf(_SC_PAGESIZE);
    for (std::size_t off = 0; off < size; off += static_cast<std::size_t>(page)) {
      a.base_[off] = std::byte{0};
    }
  }
  return a;
}

ShmArena ShmArena::open(const std::string& name, std::size_t size, bool writable, bool populate) {
  int fd = ::shm_open(name.c_str(), writable ? O_RDWR : O_RDONLY, 0);
  if (fd < 0) fail("shm_open " + name);
  int prot = PROT_READ | (writable ? PROT_WRITE : 0);
  void* p = ::mmap(nullptr, size, prot, MAP_SHARED | (populate ? MAP_POPULATE : 0), fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) fail("mmap " + name);
  ShmArena a;
  a.name_ = name;
  a.base_ = static_cast<std::byte*>(p);
  a.size_ = size;
  return a;
}

}  // namespace hprm
