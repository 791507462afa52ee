package event;

public interface Event {
    String name();
}
