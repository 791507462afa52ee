package lru;

import org.junit.Assert;
import org.junit.Test;

public class LRUTest {

    @Test
    public void simpleInsertTest() {
        LRU lru = new LRU(5, true);
        for (int i = 0; i < 5; i++) {
            addAndExpectNoEviction(lru, (100 + i));
        }
        for (int i = 5; i < 10; i++) {
            addAndExpectEviction(lru, (100 + i), ((100 + i) - 5));
        }
        for (int i = 5; i < 10; i++) {
            Assert.assertTrue(lru.exists(100 + i));
        }
    }

    @Test
    public void constructorOnlyTest() {
        LRU fresh = new LRU(1, false);
        Assert.assertNotNull(fresh);
    }

    private void addAndExpectNoEviction(LRU lru, long id) {
        lru.add(id);
    }

    private void addAndExpectEviction(LRU lru, long id, long evicted) {
        lru.add(id);
    }
}
