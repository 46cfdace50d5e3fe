#include "din/content_store.hpp"

#include <deque>

namespace din {

Reachability::Reachability(std::size_t n_agents) : n_(n_agents) {}

static std::pair<AgentId, AgentId> ordered(AgentId a, AgentId b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void Reachability::block(AgentId a, AgentId b) {
  if (a != b) blocked_.insert(ordered(a, b));
}

void Reachability::unblock(AgentId a, AgentId b) { blocked_.erase(ordered(a, b)); }

bool Reachability::connected(AgentId a, AgentId b) const {
  if (a == b) return true;
  return blocked_.count(ordered(a, b)) == 0;
}

ContentStore::ContentStore(std::size_t n_agents)
    : n_agents_(n_agents), reach_(n_agents) {}

ContentId ContentStore::put(std::vector<std::uint8_t> bytes, AgentId publisher) {
  ContentId id = sha256(bytes);
  auto it = blobs_.find(id);
  if (it == blobs_.end()) {
    Blob blob;
    blob.bytes = std::move(bytes);
    blob.holders.insert(publisher);
    blobs_.emplace(id, std::move(blob));
  } else {
    it->second.holders.insert(publisher);
  }
  return id;
}

bool ContentStore::can_get(const ContentId& id, AgentId requester) const {
  auto it = blobs_.find(id);
  if (it == blobs_.end()) return false;
  const auto& holders = it->second.holders;
  if (holders.count(requester) && online(requester)) return true;

  // Breadth-first over agents that could come to hold the blob: online
  // holders seed the frontier, honest online agents extend it by
  // fetching and resharing. The requester itself only needs one link
  // into that set.
  std::vector<char> in_frontier(n_agents_, 0);
  std::deque<AgentId> queue;
  for (AgentId h : holders) {
    if (!online(h)) continue;
    if (!in_frontier[h]) {
      in_frontier[h] = 1;
      queue.push_back(h);
    }
  }
  while (!queue.empty()) {
    AgentId cur = queue.front();
    queue.pop_front();
    for (AgentId next = 0; next < n_agents_; ++next) {
      if (in_frontier[next] || !reach_.connected(cur, next)) continue;
      if (next == requester) return true;
      if (!honest_relay(next)) continue;
      in_frontier[next] = 1;
      queue.push_back(next);
    }
  }
  return false;
}

const std::vector<std::uint8_t>& ContentStore::get(const ContentId& id, AgentId requester) {
  if (!can_get(id, requester))
    fail(ErrorCode::NotFound, "blob " + id.hex().substr(0, 12) + " unreachable by agent " +
                                  std::to_string(requester));
  auto& blob = blobs_.at(id);
  blob.holders.insert(requester);
  return blob.bytes;
}

const std::vector<std::uint8_t>& ContentStore::fetch_any(const ContentId& id) const {
  auto it = blobs_.find(id);
  if (it == blobs_.end())
    fail(ErrorCode::NotFound, "blob " + id.hex().substr(0, 12) + " not stored");
  return it->second.bytes;
}

std::size_t ContentStore::availability_count(AgentId agent,
                                             const std::vector<ContentId>& ids) const {
  std::size_t count = 0;
  for (const auto& id : ids)
    if (can_get(id, agent)) ++count;
  return count;
}

std::vector<const std::vector<std::uint8_t>*> ContentStore::all_blobs() const {
  std::vector<const std::vector<std::uint8_t>*> out;
  out.reserve(blobs_.size());
  for (const auto& [id, blob] : blobs_) out.push_back(&blob.bytes);
  return out;
}

}  // namespace din
