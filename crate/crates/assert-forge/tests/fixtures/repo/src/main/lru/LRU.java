package lru;

import java.util.HashMap;
import java.util.Map;

public class LRU {

    private final Map<Long, Long> m_lruMap = new HashMap<Long, Long>();
    private final int capacity;
    private final boolean strict;

    public LRU(int capacity, boolean strict) {
        this.capacity = capacity;
        this.strict = strict;
    }

    public void add(long id) {
        m_lruMap.put(id, id);
    }

    public boolean exists(long id) {
        return m_lruMap.containsKey(id);
    }
}
