#pragma once

// Byte-level transport. Authentication lives in the message layer (signed
// requests and responses), so every binding here carries plain frames:
// in-process calls, a worker-pool host with crash injection, TCP, and a
// replica balancer.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vpki/bytes.hpp"

namespace vpki::transport {

/// Server side: one request frame in, one response frame out. Never throws for
/// protocol errors (those become error envelopes).
class Handler {
 public:
  virtual ~Handler() = default;
  virtual Bytes handle(ByteView frame) = 0;
};

/// Client side. Throws Error(transport_error) when the peer is unreachable.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual Bytes exchange(ByteView frame) = 0;
  /// Cheap liveness check used by balancer health probes.
  virtual bool probe() { return true; }
};

class DirectEndpoint final : public Endpoint {
 public:
  explicit DirectEndpoint(std::shared_ptr<Handler> handler) : handler_(std::move(handler)) {}
  Bytes exchange(ByteView frame) override { return handler_->handle(frame); }

 private:
  std::shared_ptr<Handler> handler_;
};

/// Runs a handler on a fixed worker pool behind a FIFO queue. `kill` models a
/// hard crash: queued and in-flight requests fail, new ones are refused until
/// `restart`. The handler object (the service state) survives, standing in
/// for state recovered from its store on restart.
class ServiceHost {
 public:
  ServiceHost(std::shared_ptr<Handler> handler, std::size_t workers, std::string name = {});
  ~ServiceHost();
  ServiceHost(const ServiceHost&) = delete;
  ServiceHost& operator=(const ServiceHost&) = delete;

  Bytes call(ByteView frame);
  void kill();
  void restart();
  bool alive() const { return alive_.load(); }
  const std::string& name() const { return name_; }
  std::size_t queue_depth() const;
  std::uint64_t served() const { return served_.load(); }

 private:
  struct Task {
    Bytes frame;
    std::promise<Bytes> reply;
    std::uint64_t generation;
  };
  void worker_loop();

  std::shared_ptr<Handler> handler_;
  std::string name_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Task> queue_;
  std::vector<std::thread> workers_;
  std::atomic<bool> alive_{true};
  std::atomic<std::uint64_t> generation_{0};
  std::atomic<std::uint64_t> served_{0};
  bool stopping_ = false;
};

class LocalEndpoint final : public Endpoint {
 public:
  explicit LocalEndpoint(std::shared_ptr<ServiceHost> host) : host_(std::move(host)) {}
  Bytes exchange(ByteView frame) override { return host_->call(frame); }
  bool probe() override { return host_->alive(); }

 private:
  std::shared_ptr<ServiceHost> host_;
};

/// Records every request and response passing through.
class CapturingEndpoint final : public Endpoint {
 public:
  explicit CapturingEndpoint(std::shared_ptr<Endpoint> inner) : inner_(std::move(inner)) {}
  Bytes exchange(ByteView frame) override;
  bool probe() override { return inner_->probe(); }

  std::vector<Bytes> requests() const;
  std::vector<Bytes> responses() const;

 private:
  std::shared_ptr<Endpoint> inner_;
  mutable std::mutex mu_;
  std::vector<Bytes> requests_;
  std::vector<Bytes> responses_;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
  static HostPort parse(const std::string& addr);
  std::string str() const;
};

/// Thread-per-connection TCP server. Connections may carry several
/// request/response exchanges in sequence.
class TcpServer {
 public:
  using Dispatch = std::function<Bytes(ByteView)>;
  TcpServer(const HostPort& listen, Dispatch dispatch);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

 private:
  void accept_loop();
  void serve(int fd);

  Dispatch dispatch_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{true};
  std::thread acceptor_;
  std::mutex mu_;
  std::condition_variable stopped_cv_;
  std::vector<int> connections_;
  std::vector<std::thread> connection_threads_;
};

/// One TCP connection per exchange.
class TcpEndpoint final : public Endpoint {
 public:
  explicit TcpEndpoint(HostPort peer, int timeout_ms = 30000) : peer_(std::move(peer)), timeout_ms_(timeout_ms) {}
  Bytes exchange(ByteView frame) override;
  bool probe() override;

 private:
  int connect_socket() const;
  HostPort peer_;
  int timeout_ms_;
};

/// Reads exactly one frame from a socket; throws transport_error/frame_error.
Bytes read_frame(int fd);
void write_all(int fd, ByteView data);

/// Front for replicas of one PCA identity. Pseudonym requests are pinned to a
/// replica by rendezvous-hashing the ticket (issuer, serial) over healthy
/// replicas; pseudonym-serial lookups (resolution, OCSP) go to the replica
/// whose index is encoded in the top byte of the serial. Replicas are marked
/// down on transport failure and re-probed periodically.
class Balancer final : public Endpoint {
 public:
  explicit Balancer(std::vector<std::shared_ptr<Endpoint>> replicas);
  ~Balancer() override;

  Bytes exchange(ByteView frame) override;
  bool probe() override;

  /// Starts a background prober with the given real-time period.
  void start_health_checks(std::chrono::milliseconds period);
  void stop_health_checks();
  void probe_now();
  std::size_t healthy_count() const;
  std::size_t replica_count() const { return replicas_.size(); }

 private:
  std::size_t pick(ByteView frame) const;
  std::size_t pick_by_key(std::uint64_t key) const;

  std::vector<std::shared_ptr<Endpoint>> replicas_;
  std::unique_ptr<std::atomic<bool>[]> healthy_;
  std::thread prober_;
  std::mutex prober_mu_;
  std::condition_variable prober_cv_;
  bool prober_running_ = false;
};

inline constexpr int kReplicaShift = 56;
inline std::uint32_t replica_of_serial(std::uint64_t serial) {
  return static_cast<std::uint32_t>(serial >> kReplicaShift);
}

}  // namespace vpki::transport
