#include "vpki/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "vpki/errors.hpp"
#include "vpki/messages.hpp"
#include "vpki/wire.hpp"

namespace vpki::transport {

// --- ServiceHost ----------------------------------------------------------------

ServiceHost::ServiceHost(std::shared_ptr<Handler> handler, std::size_t workers, std::string name)
    : handler_(std::move(handler)), name_(std::move(name)) {
  workers = std::max<std::size_t>(workers, 1);
  for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ServiceHost::~ServiceHost() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
  for (auto& task : queue_)
    task.reply.set_exception(std::make_exception_ptr(Error(ErrorCode::transport_error, "host shut down")));
}

Bytes ServiceHost::call(ByteView frame) {
  std::future<Bytes> reply;
  {
    std::lock_guard lock(mu_);
    if (!alive_.load()) throw Error(ErrorCode::transport_error, name_ + " is down");
    Task task{Bytes(frame.begin(), frame.end()), {}, generation_.load()};
    reply = task.reply.get_future();
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
  return reply.get();
}

void ServiceHost::worker_loop() {
  for (;;) {
    Task task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    if (task.generation != generation_.load()) {
      task.reply.set_exception(std::make_exception_ptr(Error(ErrorCode::transport_error, name_ + " crashed")));
      continue;
    }
    Bytes out = handler_->handle(task.frame);
    if (task.generation != generation_.load()) {
      task.reply.set_exception(std::make_exception_ptr(Error(ErrorCode::transport_error, name_ + " crashed")));
      continue;
    }
    served_.fetch_add(1);
    task.reply.set_value(std::move(out));
  }
}

void ServiceHost::kill() {
  std::deque<Task> dropped;
  {
    std::lock_guard lock(mu_);
    alive_.store(false);
    generation_.fetch_add(1);
    dropped.swap(queue_);
  }
  for (auto& task : dropped)
    task.reply.set_exception(std::make_exception_ptr(Error(ErrorCode::transport_error, name_ + " crashed")));
}

void ServiceHost::restart() {
  std::lock_guard lock(mu_);
  alive_.store(true);
}

std::size_t ServiceHost::queue_depth() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

// --- CapturingEndpoint ------------------------------------------------------------

Bytes CapturingEndpoint::exchange(ByteView frame) {
  {
    std::lock_guard lock(mu_);
    requests_.emplace_back(frame.begin(), frame.end());
  }
  auto out = inner_->exchange(frame);
  std::lock_guard lock(mu_);
  responses_.push_back(out);
  return out;
}

std::vector<Bytes> CapturingEndpoint::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<Bytes> CapturingEndpoint::responses() const {
  std::lock_guard lock(mu_);
  return responses_;
}

// --- sockets -------------------------------------------------------------------

HostPort HostPort::parse(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "expected host:port, got " + addr);
  HostPort hp;
  hp.host = addr.substr(0, colon);
  if (hp.host.empty()) hp.host = "127.0.0.1";
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (...) {
    throw Error(ErrorCode::invalid_argument, "bad port in " + addr);
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::invalid_argument, "port out of range");
  hp.port = static_cast<std::uint16_t>(port);
  return hp;
}

std::string HostPort::str() const { return host + ":" + std::to_string(port); }

namespace {

void read_exact(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    auto r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) throw Error(ErrorCode::transport_error, "connection closed");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::transport_error, std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
}

sockaddr_in resolve(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  std::string host = hp.host == "localhost" ? "127.0.0.1" : hp.host;
  if (host == "0.0.0.0" || host == "*") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
      throw Error(ErrorCode::transport_error, "cannot resolve " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return addr;
}

}  // namespace

Bytes read_frame(int fd) {
  Bytes buf(wire::kHeaderBytes);
  read_exact(fd, buf.data(), buf.size());
  auto len = wire::payload_length_from_header(buf);
  buf.resize(wire::kHeaderBytes + len);
  if (len > 0) read_exact(fd, buf.data() + wire::kHeaderBytes, len);
  return buf;
}

void write_all(int fd, ByteView data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    auto r = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::transport_error, std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

TcpServer::TcpServer(const HostPort& listen, Dispatch dispatch) : dispatch_(std::move(dispatch)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::service_spawn_failure, "socket()");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  auto addr = resolve(listen);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 512) != 0) {
    ::close(listen_fd_);
    throw Error(ErrorCode::service_spawn_failure, "cannot listen on " + listen.str() + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() {
  stop();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    threads.swap(connection_threads_);
  }
  for (auto& t : threads) t.join();
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  std::lock_guard lock(mu_);
  for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
  stopped_cv_.notify_all();
}

void TcpServer::wait() {
  std::unique_lock lock(mu_);
  stopped_cv_.wait(lock, [&] { return !running_.load(); });
}

void TcpServer::accept_loop() {
  while (running_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_.load()) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(mu_);
    if (!running_.load()) {
      ::close(fd);
      return;
    }
    connections_.push_back(fd);
    connection_threads_.emplace_back([this, fd] { serve(fd); });
  }
}

void TcpServer::serve(int fd) {
  try {
    while (running_.load()) {
      auto request = read_frame(fd);
      auto response = dispatch_(request);
      write_all(fd, response);
    }
  } catch (const std::exception&) {
    // peer closed, malformed header, or server stopping
  }
  std::lock_guard lock(mu_);
  std::erase(connections_, fd);
  ::close(fd);
}

int TcpEndpoint::connect_socket() const {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::transport_error, "socket()");
  timeval tv{timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  sockaddr_in addr{};
  try {
    addr = resolve(peer_);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw Error(ErrorCode::transport_error, "connect " + peer_.str() + ": " + std::strerror(errno));
  }
  return fd;
}

Bytes TcpEndpoint::exchange(ByteView frame) {
  int fd = connect_socket();
  try {
    write_all(fd, frame);
    auto out = read_frame(fd);
    ::close(fd);
    return out;
  } catch (...) {
    ::close(fd);
    throw;
  }
}

bool TcpEndpoint::probe() {
  try {
    ::close(connect_socket());
    return true;
  } catch (...) {
    return false;
  }
}

// --- Balancer --------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::uint64_t hash_ticket(const std::string& issuer, std::uint64_t serial) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : issuer) h = (h ^ c) * 1099511628211ULL;
  return mix(h ^ mix(serial));
}

}  // namespace

Balancer::Balancer(std::vector<std::shared_ptr<Endpoint>> replicas)
    : replicas_(std::move(replicas)), healthy_(new std::atomic<bool>[replicas_.size()]) {
  if (replicas_.empty()) throw Error(ErrorCode::invalid_argument, "balancer needs at least one replica");
  for (std::size_t i = 0; i < replicas_.size(); ++i) healthy_[i].store(true);
}

Balancer::~Balancer() { stop_health_checks(); }

std::size_t Balancer::pick_by_key(std::uint64_t key) const {
  std::size_t best = replicas_.size();
  std::uint64_t best_score = 0;
  for (std::size_t i = 0; i < replicas_.size(); ++i) {
    if (!healthy_[i].load()) continue;
    auto score = mix(key ^ mix(i + 1));
    if (best == replicas_.size() || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  if (best == replicas_.size()) throw Error(ErrorCode::transport_error, "no healthy replica");
  return best;
}

std::size_t Balancer::pick(ByteView frame) const {
  try {
    auto env = wire::deframe(frame);
    switch (env.type()) {
      case wire::MsgType::psnym_req: {
        auto req = canonical_decode<msg::PseudonymRequest>(env.payload);
        return pick_by_key(hash_ticket(req.ticket.issuer, req.ticket.serial));
      }
      case wire::MsgType::resolve_map_req: {
        auto signed_req = canonical_decode<msg::SignedRequest>(env.payload);
        auto req = canonical_decode<msg::ResolveMapRequest>(signed_req.body);
        auto idx = replica_of_serial(req.pseudonym_serial);
        if (idx < replicas_.size()) return idx;
        break;
      }
      case wire::MsgType::ocsp_req: {
        auto signed_req = canonical_decode<msg::SignedRequest>(env.payload);
        auto req = canonical_decode<msg::OcspRequest>(signed_req.body);
        auto idx = replica_of_serial(req.query_serial);
        if (idx < replicas_.size()) return idx;
        break;
      }
      default:
        break;
    }
  } catch (const Error&) {
    // unparseable: any replica will answer with the error envelope
  }
  return pick_by_key(0x63726cULL);
}

Bytes Balancer::exchange(ByteView frame) {
  auto idx = pick(frame);
  try {
    return replicas_[idx]->exchange(frame);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::transport_error) healthy_[idx].store(false);
    throw;
  }
}

bool Balancer::probe() { return healthy_count() > 0; }

std::size_t Balancer::healthy_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < replicas_.size(); ++i) n += healthy_[i].load() ? 1 : 0;
  return n;
}

void Balancer::probe_now() {
  for (std::size_t i = 0; i < replicas_.size(); ++i) healthy_[i].store(replicas_[i]->probe());
}

void Balancer::start_health_checks(std::chrono::milliseconds period) {
  std::lock_guard lock(prober_mu_);
  if (prober_running_) return;
  prober_running_ = true;
  prober_ = std::thread([this, period] {
    std::unique_lock lock(prober_mu_);
    while (prober_running_) {
      lock.unlock();
      probe_now();
      lock.lock();
      prober_cv_.wait_for(lock, period, [&] { return !prober_running_; });
    }
  });
}

void Balancer::stop_health_checks() {
  {
    std::lock_guard lock(prober_mu_);
    if (!prober_running_) return;
    prober_running_ = false;
  }
  prober_cv_.notify_all();
  if (prober_.joinable()) prober_.join();
}

}  // namespace vpki::transport
