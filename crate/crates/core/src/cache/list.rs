//! Region eviction list with a main partition and a vOP partition.
//!
//! Both partitions are intrusive doubly linked lists over region ids, most
//! recent at the head. Eviction takes the vOP tail when vOP is non-empty and
//! the main tail otherwise.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Main,
    Vop,
}

#[derive(Debug, Clone, Copy)]
struct Ends {
    head: u32,
    tail: u32,
    len: usize,
}

impl Ends {
    const EMPTY: Ends = Ends { head: NIL, tail: NIL, len: 0 };
}

#[derive(Debug, Clone)]
pub struct EvictionList {
    prev: Vec<u32>,
    next: Vec<u32>,
    part: Vec<Option<Partition>>,
    main: Ends,
    vop: Ends,
}

impl EvictionList {
    pub fn new(slots: usize) -> Self {
        EvictionList {
            prev: vec![NIL; slots],
            next: vec![NIL; slots],
            part: vec![None; slots],
            main: Ends::EMPTY,
            vop: Ends::EMPTY,
        }
    }

    fn ends(&mut self, p: Partition) -> &mut Ends {
        match p {
            Partition::Main => &mut self.main,
            Partition::Vop => &mut self.vop,
        }
    }

    fn ends_ref(&self, p: Partition) -> &Ends {
        match p {
            Partition::Main => &self.main,
            Partition::Vop => &self.vop,
        }
    }

    pub fn partition_of(&self, id: u32) -> Option<Partition> {
        self.part[id as usize]
    }

    pub fn contains(&self, id: u32) -> bool {
        self.part[id as usize].is_some()
    }

    pub fn len(&self, p: Partition) -> usize {
        self.ends_ref(p).len
    }

    pub fn total(&self) -> usize {
        self.main.len + self.vop.len
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn head(&self, p: Partition) -> Option<u32> {
        Some(self.ends_ref(p).head).filter(|&h| h != NIL)
    }

    pub fn tail(&self, p: Partition) -> Option<u32> {
        Some(self.ends_ref(p).tail).filter(|&t| t != NIL)
    }

    /// Region that top-down eviction takes next.
    pub fn victim(&self) -> Option<u32> {
        self.tail(Partition::Vop).or_else(|| self.tail(Partition::Main))
    }

    pub fn push_head(&mut self, p: Partition, id: u32) {
        debug_assert!(!self.contains(id), "region {id} already listed");
        let old = self.ends(p).head;
        self.prev[id as usize] = NIL;
        self.next[id as usize] = old;
        if old != NIL {
            self.prev[old as usize] = id;
        }
        let e = self.ends(p);
        e.head = id;
        if e.tail == NIL {
            e.tail = id;
        }
        e.len += 1;
        self.part[id as usize] = Some(p);
    }

    pub fn push_tail(&mut self, p: Partition, id: u32) {
        debug_assert!(!self.contains(id), "region {id} already listed");
        let old = self.ends(p).tail;
        self.next[id as usize] = NIL;
        self.prev[id as usize] = old;
        if old != NIL {
            self.next[old as usize] = id;
        }
        let e = self.ends(p);
        e.tail = id;
        if e.head == NIL {
            e.head = id;
        }
        e.len += 1;
        self.part[id as usize] = Some(p);
    }

    pub fn remove(&mut self, id: u32) -> Option<Partition> {
        let p = self.part[id as usize].take()?;
        let (prev, next) = (self.prev[id as usize], self.next[id as usize]);
        if prev != NIL {
            self.next[prev as usize] = next;
        } else {
            self.ends(p).head = next;
        }
        if next != NIL {
            self.prev[next as usize] = prev;
        } else {
            self.ends(p).tail = prev;
        }
        self.ends(p).len -= 1;
        self.prev[id as usize] = NIL;
        self.next[id as usize] = NIL;
        Some(p)
    }

    /// Head-to-tail ids of one partition.
    pub fn iter(&self, p: Partition) -> impl Iterator<Item = u32> + '_ {
        let mut cur = self.ends_ref(p).head;
        std::iter::from_fn(move || {
            (cur != NIL).then(|| {
                let id = cur;
                cur = self.next[id as usize];
                id
            })
        })
    }

    /// Moves regions between partitions so that vOP holds
    /// `floor(vop_ratio * total)` of them: main's tail sinks into vOP's head,
    /// or vOP's head rises to main's tail.
    pub fn rebalance(&mut self, vop_ratio: f64) {
        let target = vop_target(vop_ratio, self.total());
        while self.vop.len < target {
            let Some(id) = self.tail(Partition::Main) else { break };
            self.remove(id);
            self.push_head(Partition::Vop, id);
        }
        while self.vop.len > target {
            let Some(id) = self.head(Partition::Vop) else { break };
            self.remove(id);
            self.push_tail(Partition::Main, id);
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for p in [Partition::Main, Partition::Vop] {
            let ids: Vec<u32> = self.iter(p).collect();
            if ids.len() != self.len(p) {
                return Err(format!("{p:?} length {} but {} linked", self.len(p), ids.len()));
            }
            if ids.iter().any(|&id| self.part[id as usize] != Some(p)) {
                return Err(format!("{p:?} holds a region tagged with another partition"));
            }
            let back: Vec<u32> = {
                let mut v = Vec::new();
                let mut cur = self.ends_ref(p).tail;
                while cur != NIL {
                    v.push(cur);
                    cur = self.prev[cur as usize];
                }
                v.reverse();
                v
            };
            if back != ids {
                return Err(format!("{p:?} forward and backward links disagree"));
            }
        }
        let tagged = self.part.iter().filter(|p| p.is_some()).count();
        if tagged != self.total() {
            return Err("partition tags and list lengths disagree".into());
        }
        Ok(())
    }
}

pub fn vop_target(vop_ratio: f64, total: usize) -> usize {
    ((vop_ratio * total as f64) + 1e-9).floor() as usize
}
